//! Dynamics harmonics analysis: joint-space trajectories split into
//! isotypic subspaces, with the kinetic energy carried by each.

use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::isotypic::{decompose, IsotypicDecomposition, Subspace};
use crate::rbd::RobotModel;
use crate::scalar::Real;
use crate::symm::MorphologicalSymmetryGroup;

/// Off-block norm above which energies are refused.
pub const OFF_BLOCK_LIMIT: f64 = 1e-6;

/// Sampled joint-space trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryTable<T: Real> {
    times: Vec<T>,
    q: Vec<DVector<T>>,
    v: Vec<DVector<T>>,
}

impl<T: Real> TrajectoryTable<T> {
    pub fn new(times: Vec<T>, q: Vec<DVector<T>>, v: Vec<DVector<T>>) -> Result<Self> {
        if q.len() != times.len() || v.len() != times.len() {
            return Err(invalid("times, positions and velocities differ in length"));
        }
        if let Some(n) = q.first().map(|x| x.len()) {
            if q.iter().chain(v.iter()).any(|x| x.len() != n) {
                return Err(invalid("all samples need the same joint count"));
            }
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("times must be strictly increasing"));
        }
        Ok(TrajectoryTable { times, q, v })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Joint count, `None` for an empty table.
    pub fn nj(&self) -> Option<usize> {
        self.q.first().map(|x| x.len())
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn positions(&self) -> &[DVector<T>] {
        &self.q
    }

    pub fn velocities(&self) -> &[DVector<T>] {
        &self.v
    }

    /// Reads `t, q_0..q_{nj-1}, v_0..v_{nj-1}`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv_from(file)
    }

    pub fn read_csv_from<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("t") || header.len() % 2 != 1 {
            return Err(Error::Schema {
                column: header.first().cloned().unwrap_or_default(),
                reason: "expected columns t, q_0.., v_0..".into(),
            });
        }
        let nj = (header.len() - 1) / 2;
        let expected = trajectory_columns(nj);
        if let Some((h, e)) = header.iter().zip(&expected).find(|(h, e)| h != e) {
            return Err(Error::Schema {
                column: h.clone(),
                reason: format!("expected `{e}`"),
            });
        }
        let (mut times, mut q, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                row: r,
                column: String::new(),
                reason: e.to_string(),
            })?;
            let mut vals = Vec::with_capacity(header.len());
            for (c, cell) in expected.iter().zip(rec.iter()) {
                let x: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: r,
                    column: c.clone(),
                    reason: format!("`{cell}` is not a number"),
                })?;
                vals.push(T::lit(x));
            }
            times.push(vals[0]);
            q.push(DVector::from_column_slice(&vals[1..1 + nj]));
            v.push(DVector::from_column_slice(&vals[1 + nj..]));
        }
        Self::new(times, q, v)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(trajectory_columns(self.nj().unwrap_or(0)))?;
        for i in 0..self.len() {
            let row = std::iter::once(self.times[i])
                .chain(self.q[i].iter().copied())
                .chain(self.v[i].iter().copied())
                .map(|x| format!("{}", x.to_f64_lossy()));
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn trajectory_columns(nj: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((0..nj).map(|i| format!("q_{i}")))
        .chain((0..nj).map(|i| format!("v_{i}")))
        .collect()
}

/// An isotypic decomposition of the joint-space representation of a group
/// that was verified on a model.
#[derive(Clone, Debug)]
pub struct VerifiedDecomposition<T: Real> {
    dec: IsotypicDecomposition<T>,
    group: String,
}

impl<T: Real> VerifiedDecomposition<T> {
    pub fn from_msg(msg: &MorphologicalSymmetryGroup<T>) -> Result<Self> {
        if !msg.is_verified() {
            return Err(Error::PreconditionViolation(
                "energies need a decomposition of a verified symmetry group".into(),
            ));
        }
        Ok(VerifiedDecomposition {
            dec: decompose(msg.joint_space_rep())?,
            group: msg.group().name().to_string(),
        })
    }

    pub fn decomposition(&self) -> &IsotypicDecomposition<T> {
        &self.dec
    }

    pub fn group_name(&self) -> &str {
        &self.group
    }
}

/// Coordinates of one isotypic subspace along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceTrajectory<T: Real> {
    pub positions: Vec<DVector<T>>,
    pub velocities: Vec<DVector<T>>,
}

/// `T·q` and `T·v` split per subspace.
pub fn project_trajectory<T: Real>(
    dec: &IsotypicDecomposition<T>,
    traj: &TrajectoryTable<T>,
) -> Result<Vec<SubspaceTrajectory<T>>> {
    if let Some(nj) = traj.nj() {
        if nj != dec.dim() {
            return Err(invalid(format!(
                "trajectory has {nj} joints, decomposition has dimension {}",
                dec.dim()
            )));
        }
    }
    let t = dec.t();
    let mut out: Vec<SubspaceTrajectory<T>> = dec
        .subspaces()
        .iter()
        .map(|_| SubspaceTrajectory {
            positions: Vec::with_capacity(traj.len()),
            velocities: Vec::with_capacity(traj.len()),
        })
        .collect();
    for i in 0..traj.len() {
        let q = t * &traj.q[i];
        let v = t * &traj.v[i];
        for (k, s) in dec.subspaces().iter().enumerate() {
            out[k].positions.push(q.rows(s.row_start, s.dim).into_owned());
            out[k].velocities.push(v.rows(s.row_start, s.dim).into_owned());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct DhaResult<T: Real> {
    pub decomposition: IsotypicDecomposition<T>,
    pub times: Vec<T>,
    pub components: Vec<SubspaceTrajectory<T>>,
    /// `energies[k][t]`, from the diagonal block of subspace `k` only.
    pub energies: Vec<Vec<T>>,
    /// `½·vᵀ·M̄(q)·v`.
    pub total_energy: Vec<T>,
    /// Isotypic off-block norm of `M̄(q)` per sample.
    pub off_block: Vec<T>,
}

impl<T: Real> DhaResult<T> {
    pub fn subspaces(&self) -> &[Subspace] {
        self.decomposition.subspaces()
    }

    /// `|Σ_k energy_k − total| / max(1, total)` per sample.
    pub fn energy_sum_gap(&self) -> Vec<T> {
        (0..self.times.len())
            .map(|t| {
                let sum = self.energies.iter().fold(T::zero(), |a, e| a + e[t]);
                (sum - self.total_energy[t]).abs() / self.total_energy[t].max(T::one())
            })
            .collect()
    }

    /// Share of the summed total energy carried by each subspace over the
    /// whole trajectory. Zero everywhere when the trajectory carries none.
    pub fn energy_fractions(&self) -> Vec<T> {
        let total = self.total_energy.iter().fold(T::zero(), |a, &e| a + e);
        self.energies
            .iter()
            .map(|e| {
                if total == T::zero() {
                    T::zero()
                } else {
                    e.iter().fold(T::zero(), |a, &x| a + x) / total
                }
            })
            .collect()
    }
}

/// Per-subspace kinetic energy along a trajectory. Refuses any sample whose
/// mass matrix couples two isotypic subspaces beyond [`OFF_BLOCK_LIMIT`].
pub fn subspace_energies<T: Real>(
    model: &RobotModel<T>,
    dec: &VerifiedDecomposition<T>,
    traj: &TrajectoryTable<T>,
) -> Result<DhaResult<T>> {
    let res = subspace_energies_unchecked(model, dec, traj)?;
    let limit = T::lit(OFF_BLOCK_LIMIT);
    if let Some((sample, norm)) = res.off_block.iter().enumerate().find(|(_, &o)| o > limit) {
        return Err(Error::EquivarianceViolation {
            sample,
            norm: norm.to_f64_lossy(),
        });
    }
    Ok(res)
}

/// As [`subspace_energies`] but without the off-block guard; the measured
/// off-block norms are returned in the result.
pub fn subspace_energies_unchecked<T: Real>(
    model: &RobotModel<T>,
    dec: &VerifiedDecomposition<T>,
    traj: &TrajectoryTable<T>,
) -> Result<DhaResult<T>> {
    let d = &dec.dec;
    if let Some(nj) = traj.nj() {
        if nj != model.nj() {
            return Err(invalid(format!("trajectory has {nj} joints, model has {}", model.nj())));
        }
    }
    if d.dim() != model.nj() {
        return Err(invalid("decomposition dimension does not match the model"));
    }
    let components = project_trajectory(d, traj)?;
    let half = T::lit(0.5);
    let per_sample: Vec<(Vec<T>, T, T)> = (0..traj.len())
        .into_par_iter()
        .map(|i| -> Result<_> {
            let m = model.mass_matrix(&traj.q[i])?;
            let iso = d.to_isotypic_basis(&m)?;
            let energies = d
                .subspaces()
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let vk = &components[k].velocities[i];
                    let block = iso.view((s.row_start, s.row_start), (s.dim, s.dim));
                    half * vk.dot(&(block * vk))
                })
                .collect();
            let v = &traj.v[i];
            let total = half * v.dot(&(&m * v));
            Ok((energies, total, d.off_block_norm(&m)?))
        })
        .collect::<Result<_>>()?;
    let n_sub = d.subspaces().len();
    let mut energies = vec![Vec::with_capacity(traj.len()); n_sub];
    let mut total_energy = Vec::with_capacity(traj.len());
    let mut off_block = Vec::with_capacity(traj.len());
    for (e, t, o) in per_sample {
        for (k, ek) in e.into_iter().enumerate() {
            energies[k].push(ek);
        }
        total_energy.push(t);
        off_block.push(o);
    }
    Ok(DhaResult {
        decomposition: d.clone(),
        times: traj.times.clone(),
        components,
        energies,
        total_energy,
        off_block,
    })
}

/// Writes `time, total_energy, energy_0..` as CSV and the subspace list as
/// a JSON sidecar with the same stem.
pub fn export_dha<T: Real>(result: &DhaResult<T>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["time".to_string(), "total_energy".to_string()];
    header.extend((0..result.energies.len()).map(|k| format!("energy_{k}")));
    w.write_record(&header)?;
    for t in 0..result.times.len() {
        let row = [result.times[t], result.total_energy[t]]
            .into_iter()
            .chain(result.energies.iter().map(|e| e[t]))
            .map(|x| format!("{}", x.to_f64_lossy()));
        w.write_record(row)?;
    }
    w.flush()?;
    let meta = serde_json::json!({
        "group": result.decomposition.source().group().name(),
        "nj": result.decomposition.dim(),
        "columns": header,
        "subspaces": result.subspaces(),
    });
    std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Energies read back from an exported CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct DhaTable {
    pub times: Vec<f64>,
    pub total_energy: Vec<f64>,
    pub energies: Vec<Vec<f64>>,
}

pub fn read_dha(path: &Path) -> Result<DhaTable> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 || header[0] != "time" || header[1] != "total_energy" {
        return Err(Error::Schema {
            column: header.first().cloned().unwrap_or_default(),
            reason: "expected time, total_energy, energy_k..".into(),
        });
    }
    let n_sub = header.len() - 2;
    let mut out = DhaTable {
        times: Vec::new(),
        total_energy: Vec::new(),
        energies: vec![Vec::new(); n_sub],
    };
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut vals = Vec::with_capacity(header.len());
        for (c, cell) in header.iter().zip(rec.iter()) {
            vals.push(cell.parse::<f64>().map_err(|_| Error::Parse {
                row: r,
                column: c.clone(),
                reason: format!("`{cell}` is not a number"),
            })?);
        }
        out.times.push(vals[0]);
        out.total_energy.push(vals[1]);
        for k in 0..n_sub {
            out.energies[k].push(vals[2 + k]);
        }
    }
    Ok(out)
}

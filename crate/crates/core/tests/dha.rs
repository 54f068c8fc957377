mod common;

use common::k4_quadruped;
use morphosym::dha::{
    export_dha, project_trajectory, read_dha, subspace_energies, subspace_energies_unchecked, TrajectoryTable,
    VerifiedDecomposition,
};
use morphosym::symm::sample_states;
use morphosym::{Error, Msg};
use nalgebra::DVector;
use proptest::prelude::*;

/// Projector onto the configurations fixed by every group element.
fn fixed_projector(msg: &Msg) -> nalgebra::DMatrix<f64> {
    let rep = msg.joint_space_rep();
    let n = msg.group().order() as f64;
    msg.group().elements().map(|g| rep.matrix(g).clone()).fold(
        nalgebra::DMatrix::zeros(rep.dim(), rep.dim()),
        |a, m| a + m,
    ) / n
}

/// All legs swing through mirrored copies of one leg's gait.
fn synchronized(msg: &Msg, n: usize) -> TrajectoryTable<f64> {
    // averaging a motion of the first leg over the group copies it to the
    // other legs
    let p = fixed_projector(msg) * 4.0;
    let amp = DVector::from_fn(12, |i, _| if i < 3 { 0.3 + 0.1 * i as f64 } else { 0.0 });
    let phase = DVector::from_fn(12, |i, _| 0.7 * i as f64);
    let w = 2.0 * std::f64::consts::PI * 1.5;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
    let q = times
        .iter()
        .map(|&t| &p * DVector::from_fn(12, |i, _| amp[i] * (w * t + phase[i]).sin()))
        .collect();
    let v = times
        .iter()
        .map(|&t| &p * DVector::from_fn(12, |i, _| amp[i] * w * (w * t + phase[i]).cos()))
        .collect();
    TrajectoryTable::new(times, q, v).unwrap()
}

fn random(n: usize, seed: u64) -> TrajectoryTable<f64> {
    let s = sample_states::<f64>(12, n, seed);
    let times = (0..n).map(|i| i as f64 * 0.002).collect();
    let (q, v) = s.into_iter().unzip();
    TrajectoryTable::new(times, q, v).unwrap()
}

#[test]
fn synchronized_motion_lives_in_the_trivial_subspace() {
    let (robot, msg) = k4_quadruped();
    let dec = VerifiedDecomposition::from_msg(&msg).unwrap();
    let traj = synchronized(&msg, 200);
    let res = subspace_energies(&robot, &dec, &traj).unwrap();
    assert_eq!(res.subspaces().len(), 4);
    assert!(res.subspaces()[0].irrep_label.contains("triv") || res.subspaces()[0].irrep_id == 0);
    let frac = res.energy_fractions();
    assert!(frac[0] > 0.99, "{frac:?}");
    assert!(res.energy_sum_gap().iter().all(|&g| g < 1e-8));
    for k in 1..4 {
        assert!(res.components[k].positions.iter().all(|x| x.amax() < 1e-12));
    }
}

#[test]
fn random_trajectories_couple_subspaces() {
    let (robot, msg) = k4_quadruped();
    let dec = VerifiedDecomposition::from_msg(&msg).unwrap();
    let traj = random(50, 3);
    match subspace_energies(&robot, &dec, &traj) {
        Err(Error::EquivarianceViolation { sample, norm }) => {
            assert_eq!(sample, 0);
            assert!(norm > 1e-6);
        }
        other => panic!("expected an equivariance violation, got {other:?}"),
    }
    // the diagonal blocks then miss the cross-subspace energy
    let res = subspace_energies_unchecked(&robot, &dec, &traj).unwrap();
    let worst = res.energy_sum_gap().into_iter().fold(0.0, f64::max);
    assert!(worst > 1e-6);
}

#[test]
fn zero_velocity_has_zero_energy() {
    let (robot, msg) = k4_quadruped();
    let dec = VerifiedDecomposition::from_msg(&msg).unwrap();
    let mut traj = synchronized(&msg, 10);
    let v = vec![DVector::zeros(12); 10];
    traj = TrajectoryTable::new(traj.times().to_vec(), traj.positions().to_vec(), v).unwrap();
    let res = subspace_energies(&robot, &dec, &traj).unwrap();
    assert!(res.total_energy.iter().all(|&e| e == 0.0));
    assert!(res.energies.iter().flatten().all(|&e| e == 0.0));
}

#[test]
fn unverified_group_is_refused() {
    let (robot, _) = k4_quadruped();
    let perturbed = robot.with_scaled_mass("LF", 1, 1.05).unwrap();
    let msg = Msg::verify(&perturbed, &common::k4_spec(), 20, 1e-8, 0).unwrap();
    assert!(!msg.is_verified());
    assert!(matches!(VerifiedDecomposition::from_msg(&msg), Err(Error::PreconditionViolation(_))));
}

#[test]
fn dimension_mismatch_is_reported() {
    let (robot, msg) = k4_quadruped();
    let dec = VerifiedDecomposition::from_msg(&msg).unwrap();
    let traj = TrajectoryTable::new(vec![0.0], vec![DVector::zeros(3)], vec![DVector::zeros(3)]).unwrap();
    assert!(matches!(project_trajectory(dec.decomposition(), &traj), Err(Error::InvalidArgument(_))));
    assert!(matches!(subspace_energies(&robot, &dec, &traj), Err(Error::InvalidArgument(_))));
}

#[test]
fn trajectory_table_validates() {
    let z = || DVector::<f64>::zeros(2);
    assert!(TrajectoryTable::new(vec![0.0, 0.0], vec![z(), z()], vec![z(), z()]).is_err());
    assert!(TrajectoryTable::new(vec![0.0], vec![z()], vec![]).is_err());
    assert!(TrajectoryTable::new(vec![0.0, 1.0], vec![z(), DVector::zeros(3)], vec![z(), z()]).is_err());
    // non-uniform sampling is fine
    assert!(TrajectoryTable::new(vec![0.0, 0.1, 0.5], vec![z(), z(), z()], vec![z(), z(), z()]).is_ok());
}

#[test]
fn export_and_read_back() {
    let (robot, msg) = k4_quadruped();
    let dec = VerifiedDecomposition::from_msg(&msg).unwrap();
    let res = subspace_energies(&robot, &dec, &synchronized(&msg, 30)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("energies.csv");
    export_dha(&res, &path).unwrap();
    let header = std::fs::read_to_string(&path).unwrap();
    assert_eq!(header.lines().next().unwrap(), "time,total_energy,energy_0,energy_1,energy_2,energy_3");
    let table = read_dha(&path).unwrap();
    assert_eq!(table.total_energy, res.total_energy);
    assert_eq!(table.energies, res.energies);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
    assert_eq!(meta["subspaces"].as_array().unwrap().len(), 4);

    let empty = subspace_energies(&robot, &dec, &TrajectoryTable::new(vec![], vec![], vec![]).unwrap()).unwrap();
    export_dha(&empty, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
}

#[test]
fn trajectory_csv_round_trip() {
    let traj = random(20, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    traj.write_csv(&path).unwrap();
    assert_eq!(TrajectoryTable::read_csv(&path).unwrap(), traj);
}

#[test]
fn energies_are_invariant_under_the_group_at_fixed_points() {
    let (robot, msg) = k4_quadruped();
    let dec = VerifiedDecomposition::from_msg(&msg).unwrap();
    let traj = synchronized(&msg, 40);
    let base = subspace_energies(&robot, &dec, &traj).unwrap();
    let rep = msg.joint_space_rep();
    let p = fixed_projector(&msg);
    let vel = sample_states::<f64>(12, 40, 17);
    for g in msg.group().elements() {
        // positions stay fixed; velocities are arbitrary and transformed by g
        let v: Vec<_> = vel.iter().map(|(_, v)| rep.apply(g, v).unwrap()).collect();
        let moved = TrajectoryTable::new(traj.times().to_vec(), traj.positions().to_vec(), v).unwrap();
        let orig = TrajectoryTable::new(
            traj.times().to_vec(),
            traj.positions().to_vec(),
            vel.iter().map(|(_, v)| v.clone()).collect(),
        )
        .unwrap();
        let a = subspace_energies(&robot, &dec, &orig).unwrap();
        let b = subspace_energies(&robot, &dec, &moved).unwrap();
        for (ea, eb) in a.energies.iter().flatten().zip(b.energies.iter().flatten()) {
            assert!((ea - eb).abs() < 1e-9);
        }
    }
    assert!(p.amax() > 0.0 && base.total_energy.iter().all(|&e| e >= 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_is_linear_and_orthogonal(seed in 0u64..10_000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let (_, msg) = k4_quadruped();
        let dec = VerifiedDecomposition::from_msg(&msg).unwrap();
        let d = dec.decomposition();
        let a = random(5, seed);
        let b = random(5, seed + 1);
        let mix: Vec<DVector<f64>> = a.positions().iter().zip(b.positions()).map(|(x, y)| x * alpha + y * beta).collect();
        let c = TrajectoryTable::new(a.times().to_vec(), mix.clone(), mix).unwrap();
        let pa = project_trajectory(d, &a).unwrap();
        let pb = project_trajectory(d, &b).unwrap();
        let pc = project_trajectory(d, &c).unwrap();
        for k in 0..pa.len() {
            for t in 0..5 {
                let lin = &pa[k].positions[t] * alpha + &pb[k].positions[t] * beta;
                prop_assert!((&pc[k].positions[t] - lin).amax() < 1e-12);
            }
        }
        for t in 0..5 {
            let q = &a.positions()[t];
            let stacked = DVector::from_iterator(12, pa.iter().flat_map(|s| s.positions[t].iter().copied()));
            prop_assert!((d.t().transpose() * &stacked - q).amax() < 1e-12);
            let sq: f64 = pa.iter().map(|s| s.positions[t].norm_squared()).sum();
            prop_assert!((sq - q.norm_squared()).abs() < 1e-10 * q.norm_squared().max(1.0));
        }
    }
}


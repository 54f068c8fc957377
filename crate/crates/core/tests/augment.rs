mod common;

use common::k4_quadruped;
use morphosym::augment::{DatasetSchema, FieldDecl, FieldKind, RotationEncoding};
use morphosym::symm::sample_states;
use morphosym::{Error, Msg, Robot};
use nalgebra::{DVector, Matrix3, Rotation3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn decls() -> Vec<FieldDecl> {
    vec![
        FieldDecl::new("q", FieldKind::JointPos),
        FieldDecl::new("v", FieldKind::JointVel),
        FieldDecl::new("foot", FieldKind::PerBranchVec3("leg".into())),
        FieldDecl::new("com", FieldKind::Vec3),
        FieldDecl::new("omega", FieldKind::Pseudovec3),
        FieldDecl::new("rot", FieldKind::BaseRotation(RotationEncoding::Matrix)),
        FieldDecl::new("quat", FieldKind::BaseRotation(RotationEncoding::Quaternion)),
        FieldDecl::new("pos", FieldKind::BasePosition),
        FieldDecl::new("force", FieldKind::PerBranchScalar("leg".into())),
        FieldDecl::new("energy", FieldKind::InvariantScalar),
        FieldDecl::new("contact", FieldKind::ContactStateOnehot("leg".into())),
    ]
}

/// A record whose kinematic fields are measured on the robot at `(q, v)`.
fn measured(robot: &Robot, schema: &DatasetSchema<f64>, q: &DVector<f64>, v: &DVector<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (bodies, _) = robot.base_frame_kinematics(q).unwrap();
    let mut rec = vec![0.0; schema.width()];
    let put = |rec: &mut Vec<f64>, name: &str, vals: &[f64]| {
        let r = schema.field_range(name).unwrap();
        rec[r].copy_from_slice(vals);
    };
    put(&mut rec, "q", q.as_slice());
    put(&mut rec, "v", v.as_slice());
    let feet: Vec<f64> = (0..4)
        .flat_map(|b| {
            let last = bodies.iter().filter(|k| k.branch == b).last().unwrap();
            last.com.iter().copied().collect::<Vec<_>>()
        })
        .collect();
    put(&mut rec, "foot", &feet);
    let state = morphosym::State::fixed_base(q.clone(), v.clone());
    let com = robot.center_of_mass(&state).unwrap();
    put(&mut rec, "com", com.as_slice());
    let (_, k) = robot.centroidal_momentum(&state).unwrap();
    put(&mut rec, "omega", k.as_slice());
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.5);
    let rb = Rotation3::from_scaled_axis(axis).into_inner();
    put(&mut rec, "rot", rb.transpose().as_slice());
    let uq = UnitQuaternion::from_scaled_axis(axis);
    let uq = if uq.w < 0.0 { -uq.into_inner() } else { uq.into_inner() };
    put(&mut rec, "quat", &[uq.w, uq.i, uq.j, uq.k]);
    put(&mut rec, "pos", &[rng.random(), rng.random(), rng.random()]);
    put(&mut rec, "force", &[rng.random(), rng.random(), rng.random(), rng.random()]);
    put(&mut rec, "energy", &[robot.joint_space_energy(q, v).unwrap()]);
    let mut onehot = vec![0.0; 16];
    onehot[rng.random_range(0..16)] = 1.0;
    put(&mut rec, "contact", &onehot);
    rec
}

fn setup() -> (Robot, Msg, DatasetSchema<f64>) {
    let (robot, msg) = k4_quadruped();
    let schema = DatasetSchema::new(&decls(), &msg).unwrap();
    (robot, msg, schema)
}

#[test]
fn field_widths_and_column_names() {
    let (_, _, schema) = setup();
    let widths: Vec<usize> = schema.fields().iter().map(|f| f.width).collect();
    assert_eq!(widths, vec![12, 12, 12, 3, 3, 9, 4, 3, 4, 1, 16]);
    assert_eq!(schema.width(), 79);
    let cols = schema.columns();
    assert!(cols.contains(&"foot_LF_x".to_string()));
    assert!(cols.contains(&"contact_1010".to_string()));
    assert!(cols.contains(&"rot_r21".to_string()));
}

#[test]
fn field_reps_are_homomorphisms() {
    let (_, msg, schema) = setup();
    for f in schema.fields() {
        let rep = schema.field_rep(&f.name).unwrap();
        assert_eq!(rep.dim(), f.width, "{}", f.name);
        assert!(rep.homomorphism_residual() < 1e-12, "{}", f.name);
    }
    let g_s = msg.group().generators()[0];
    let v = schema.field_rep("com").unwrap();
    assert_eq!(v.matrix(g_s).as_slice(), Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0)).as_slice());
    let p = schema.field_rep("omega").unwrap();
    assert_eq!(p.matrix(g_s).as_slice(), Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, -1.0)).as_slice());
}

#[test]
fn unknown_branch_type_is_rejected() {
    let (_, msg, _) = setup();
    let bad = [FieldDecl::new("x", FieldKind::PerBranchScalar("arm".into()))];
    assert!(matches!(DatasetSchema::new(&bad, &msg), Err(Error::InvalidSchema(_))));
}

#[test]
fn augmentation_commutes_with_measurement() {
    let (robot, msg, schema) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rep = msg.joint_space_rep();
    let measured_fields = ["q", "v", "foot", "com", "omega", "energy"];
    for (q, v) in sample_states::<f64>(robot.nj(), 20, 11) {
        let rec = measured(&robot, &schema, &q, &v, &mut rng);
        for g in msg.group().elements() {
            let out = schema.transform_record(&rec, g).unwrap();
            let gq = rep.apply(g, &q).unwrap();
            let gv = rep.apply(g, &v).unwrap();
            let direct = measured(&robot, &schema, &gq, &gv, &mut rng.clone());
            for name in measured_fields {
                let r = schema.field_range(name).unwrap();
                for (a, b) in out[r.clone()].iter().zip(&direct[r]) {
                    assert!((a - b).abs() < 1e-9, "{name} under {}: {a} vs {b}", msg.group().element_name(g));
                }
            }
        }
    }
}

#[test]
fn sagittal_reflection_swaps_sides_and_flips_abduction() {
    let (robot, msg, schema) = setup();
    let g_s = msg.group().generators()[0];
    let q = DVector::from_fn(12, |i, _| 0.1 * (i as f64 + 1.0));
    let v = DVector::from_fn(12, |i, _| 0.05 * (i as f64) - 0.2);
    let mut rec = vec![0.0; schema.width()];
    let rq = schema.field_range("q").unwrap();
    let rv = schema.field_range("v").unwrap();
    rec[rq.clone()].copy_from_slice(q.as_slice());
    rec[rv.clone()].copy_from_slice(v.as_slice());
    let quat = schema.field_range("quat").unwrap();
    rec[quat.start] = 1.0;
    let rot = schema.field_range("rot").unwrap();
    rec[rot].copy_from_slice(Matrix3::<f64>::identity().as_slice());
    let out = schema.transform_record(&rec, g_s).unwrap();
    let gq = &out[rq];
    let expect = [-0.4, 0.5, 0.6, -0.1, 0.2, 0.3, -1.0, 1.1, 1.2, -0.7, 0.8, 0.9];
    for (a, b) in gq.iter().zip(expect) {
        assert!((a - b).abs() < 1e-15);
    }
    let gv = DVector::from_column_slice(&out[rv]);
    let e0 = robot.joint_space_energy(&q, &v).unwrap();
    let e1 = robot.joint_space_energy(&DVector::from_column_slice(gq), &gv).unwrap();
    assert!((e0 - e1).abs() < 1e-12 * e0.max(1.0));
}

#[test]
fn identity_is_exact_and_inverse_round_trips() {
    let (robot, msg, schema) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let group = msg.group();
    for (q, v) in sample_states::<f64>(robot.nj(), 10, 2) {
        let rec = measured(&robot, &schema, &q, &v, &mut rng);
        let same = schema.transform_record(&rec, group.identity()).unwrap();
        assert!(rec.iter().zip(&same).all(|(a, b)| a.to_bits() == b.to_bits()));
        for g in group.elements() {
            let there = schema.transform_record(&rec, g).unwrap();
            let back = schema.transform_record(&there, group.inverse(g).unwrap()).unwrap();
            for (a, b) in rec.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn quaternion_output_is_canonical() {
    let (_, msg, _) = setup();
    let schema = DatasetSchema::new(&[FieldDecl::new("o", FieldKind::BaseRotation(RotationEncoding::Quaternion))], &msg).unwrap();
    let rec = vec![-0.5, 0.5, 0.5, 0.5];
    let out = schema.transform_record(&rec, msg.group().identity()).unwrap();
    assert_eq!(out, vec![0.5, -0.5, -0.5, -0.5]);
    for g in msg.group().elements() {
        let out = schema.transform_record(&rec, g).unwrap();
        assert!(out[0] >= 0.0);
        let n: f64 = out.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-15);
    }
}

#[test]
fn corrupt_rotation_and_bad_width_are_reported() {
    let (_, msg, _) = setup();
    let schema = DatasetSchema::new(&[FieldDecl::new("r", FieldKind::BaseRotation(RotationEncoding::Matrix))], &msg).unwrap();
    let mut rec: Vec<f64> = Matrix3::identity().as_slice().to_vec();
    rec[0] = 1.1;
    let g = msg.group().generators()[0];
    assert!(matches!(schema.transform_record(&rec, g), Err(Error::CorruptRecord(_))));
    assert!(matches!(schema.transform_record(&rec[..8], g), Err(Error::InvalidArgument(_))));
    let err = schema.orbit_dataset(&[Matrix3::identity().as_slice().to_vec(), rec]).unwrap_err();
    assert!(matches!(err, Error::Row { row: 1, .. }));
}

#[test]
fn contact_permutation_is_an_involution_for_reflections() {
    let (_, msg, schema) = setup();
    let rep = schema.field_rep("contact").unwrap();
    for g in msg.group().elements() {
        let m = rep.matrix(g);
        assert!((m * m - nalgebra::DMatrix::<f64>::identity(16, 16)).amax() == 0.0);
    }
    // LF↔RF, LH↔RH maps code 1000 (only LF) to 0100 (only RF)
    let g_s = msg.group().generators()[0];
    let mut rec = vec![0.0; 16];
    rec[0b1000] = 1.0;
    let one = DatasetSchema::new(&[FieldDecl::new("c", FieldKind::ContactStateOnehot("leg".into()))], &msg).unwrap();
    let out = one.transform_record(&rec, g_s).unwrap();
    assert_eq!(out.iter().position(|&x| x == 1.0), Some(0b0100));
}

#[test]
fn orbit_sizes_and_order() {
    let (robot, msg, schema) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data: Vec<Vec<f64>> = sample_states::<f64>(robot.nj(), 25, 4)
        .iter()
        .map(|(q, v)| measured(&robot, &schema, q, v, &mut rng))
        .collect();
    let orbit = schema.orbit_dataset(&data).unwrap();
    assert_eq!(orbit.len(), 4 * data.len());
    for (i, rec) in data.iter().enumerate() {
        for g in msg.group().elements() {
            assert_eq!(orbit[4 * i + g.0], schema.transform_record(rec, g).unwrap());
        }
    }
    // the orbit of a fixed record is |G| copies of it
    let fixed = vec![vec![0.0; schema.width()]];
    let mut fixed = fixed;
    let quat = schema.field_range("quat").unwrap();
    fixed[0][quat.start] = 1.0;
    let rot = schema.field_range("rot").unwrap();
    fixed[0][rot].copy_from_slice(Matrix3::<f64>::identity().as_slice());
    let orbit = schema.orbit_dataset(&fixed).unwrap();
    assert!(orbit.iter().all(|r| *r == fixed[0]));
}

#[test]
fn trivial_group_leaves_data_unchanged() {
    let robot = common::model("quadruped.toml");
    let spec = morphosym::symm::SymmetrySpec::trivial(&robot);
    let msg = Msg::verify(&robot, &spec, 5, 1e-8, 0).unwrap();
    let schema = DatasetSchema::new(&decls(), &msg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<Vec<f64>> = sample_states::<f64>(robot.nj(), 5, 4)
        .iter()
        .map(|(q, v)| measured(&robot, &schema, q, v, &mut rng))
        .collect();
    assert_eq!(schema.orbit_dataset(&data).unwrap(), data);
}

#[test]
fn csv_round_trip_and_header_errors() {
    let (robot, _, schema) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data: Vec<Vec<f64>> = sample_states::<f64>(robot.nj(), 10, 8)
        .iter()
        .map(|(q, v)| measured(&robot, &schema, q, v, &mut rng))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    schema.write_dataset(&path, &data).unwrap();
    let back = schema.read_dataset(&path).unwrap();
    assert_eq!(back, data);
    assert_eq!(schema.orbit_dataset(&back).unwrap().len(), 40);

    let text = std::fs::read_to_string(&path).unwrap();
    let header = text.lines().next().unwrap();
    let dropped = header.replacen("foot_RF_y,", "", 1);
    let bad: String = std::iter::once(dropped.as_str()).collect::<Vec<_>>().join("\n");
    match schema.read_dataset_from(bad.as_bytes()) {
        Err(Error::Schema { column, .. }) => assert_eq!(column, "foot_RF_y"),
        other => panic!("{other:?}"),
    }
    let ncols = schema.width();
    let mut cells = vec!["0".to_string(); ncols];
    cells[3] = "abc".into();
    let bad = format!("{header}\n{}\n", cells.join(","));
    match schema.read_dataset_from(bad.as_bytes()) {
        Err(Error::Parse { row, column, .. }) => {
            assert_eq!(row, 0);
            assert_eq!(column, "q_3");
        }
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn orbit_is_closed(seed in 0u64..1000) {
        let (robot, msg, schema) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (q, v) = &sample_states::<f64>(robot.nj(), 1, seed)[0];
        let rec = measured(&robot, &schema, q, v, &mut rng);
        let orbit = schema.orbit_dataset(&[rec]).unwrap();
        for g in msg.group().elements() {
            let moved: Vec<Vec<f64>> = orbit.iter().map(|r| schema.transform_record(r, g).unwrap()).collect();
            for m in &moved {
                let hit = orbit.iter().any(|o| o.iter().zip(m).all(|(a, b)| (a - b).abs() < 1e-12));
                prop_assert!(hit);
            }
        }
    }

    #[test]
    fn write_read_round_trip(vals in proptest::collection::vec(-1e6f64..1e6, 12 * 3)) {
        let (_, msg, _) = setup();
        let schema = DatasetSchema::new(&[FieldDecl::new("q", FieldKind::JointPos)], &msg).unwrap();
        let data: Vec<Vec<f64>> = vals.chunks(12).map(|c| c.to_vec()).collect();
        let mut buf = Vec::new();
        schema.write_dataset_to(&mut buf, &data).unwrap();
        prop_assert_eq!(schema.read_dataset_from(buf.as_slice()).unwrap(), data);
    }
}

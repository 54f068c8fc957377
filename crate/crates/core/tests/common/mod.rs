#![allow(dead_code)]

use std::path::PathBuf;

use morphosym::symm::SymmetrySpec;
use morphosym::{Msg, Robot};

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models")
}

pub fn model(name: &str) -> Robot {
    Robot::load(&models_dir().join(name)).unwrap()
}

pub fn k4_spec() -> SymmetrySpec {
    SymmetrySpec::load(&models_dir().join("quadruped_k4.toml")).unwrap()
}

/// Reference quadruped with its verified Klein four-group.
pub fn k4_quadruped() -> (Robot, Msg) {
    let robot = model("quadruped.toml");
    let msg = Msg::verify(&robot, &k4_spec(), 50, 1e-8, 0).unwrap();
    assert!(msg.is_verified());
    (robot, msg)
}

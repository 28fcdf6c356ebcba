//! Bundled example systems.

use crate::sysfile::{load_system, LoadedSystem};

/// Planar rotation coupled to a cyclic angle, `h = L + p_th (|p|^2 - |q|^2)`.
/// File coordinates are ordered `(q1, q2, th, p1, p2, pth)`.
pub const EX16: &str = r#"name = "EX16"
proper_action = true
hamiltonian = "(q1*p2 - q2*p1) + pth*(p1^2 + p2^2 - q1^2 - q2^2)"

[phase_space]
dof = 3
coordinates = ["q1", "q2", "th", "p1", "p2", "pth"]
periodic = ["th"]

[algebra]
dim = 1
labels = ["theta"]
structure_constants = []
inner_product = [[1.0]]

# S^1 acting by translation of th; moment p_th.
[[generators]]
label = "theta"
b = [0, 0, 1, 0, 0, 0]
"#;

/// Isotropic oscillator on R^3 with SO(3) acting diagonally on q and p.
pub const SO3_OSCILLATOR: &str = r#"name = "SO3-oscillator"
proper_action = true
hamiltonian = "(q1^2 + q2^2 + q3^2 + p1^2 + p2^2 + p3^2)/2"

[phase_space]
dof = 3
coordinates = ["q1", "q2", "q3", "p1", "p2", "p3"]
periodic = []

[algebra]
dim = 3
labels = ["L1", "L2", "L3"]
structure_constants = [[1, 2, 3, 1.0], [2, 3, 1, 1.0], [1, 3, 2, -1.0]]
inner_product = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]

# Rotation about e_k on q and p alike; moment is q x p.
[[generators]]
label = "L1"
A = [
  [0, 0, 0, 0, 0, 0],
  [0, 0, -1, 0, 0, 0],
  [0, 1, 0, 0, 0, 0],
  [0, 0, 0, 0, 0, 0],
  [0, 0, 0, 0, 0, -1],
  [0, 0, 0, 0, 1, 0],
]

[[generators]]
label = "L2"
A = [
  [0, 0, 1, 0, 0, 0],
  [0, 0, 0, 0, 0, 0],
  [-1, 0, 0, 0, 0, 0],
  [0, 0, 0, 0, 0, 1],
  [0, 0, 0, 0, 0, 0],
  [0, 0, 0, -1, 0, 0],
]

[[generators]]
label = "L3"
A = [
  [0, -1, 0, 0, 0, 0],
  [1, 0, 0, 0, 0, 0],
  [0, 0, 0, 0, 0, 0],
  [0, 0, 0, 0, -1, 0],
  [0, 0, 0, 1, 0, 0],
  [0, 0, 0, 0, 0, 0],
]
"#;

/// Two-degree-of-freedom oscillator with no symmetry.
pub const TRIVIAL_OSCILLATOR: &str = r#"name = "trivial-oscillator"
proper_action = true
hamiltonian = "(q1^2 + q2^2 + p1^2 + p2^2)/2"

[phase_space]
dof = 2
coordinates = ["q1", "q2", "p1", "p2"]
periodic = []

[algebra]
dim = 0
structure_constants = []
"#;

pub const NAMES: [&str; 3] = ["EX16", "SO3-oscillator", "trivial-oscillator"];

pub fn source(name: &str) -> Option<&'static str> {
    match name {
        "EX16" => Some(EX16),
        "SO3-oscillator" => Some(SO3_OSCILLATOR),
        "trivial-oscillator" => Some(TRIVIAL_OSCILLATOR),
        _ => None,
    }
}

/// Loads a bundled system; panics only if a bundled file is broken.
pub fn load(name: &str) -> Option<LoadedSystem> {
    source(name).map(|text| load_system(text).unwrap_or_else(|e| panic!("bundled system {name}: {e}")))
}

pub fn ex16() -> LoadedSystem {
    load("EX16").expect("bundled")
}

pub fn so3_oscillator() -> LoadedSystem {
    load("SO3-oscillator").expect("bundled")
}

pub fn trivial_oscillator() -> LoadedSystem {
    load("trivial-oscillator").expect("bundled")
}

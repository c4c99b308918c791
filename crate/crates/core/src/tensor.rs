//! Symmetric tensors in Mandel notation.
//!
//! In-plane (2D) symmetric second-order tensors are stored as
//! `[t11, t22, √2·t12]` and fourth-order tensors with minor symmetries as the
//! corresponding 3×3 matrices, so double contraction is a matrix product and
//! the Frobenius norm is the Euclidean norm. Plane-strain constitutive updates
//! additionally carry the out-of-plane component in a 4-vector
//! `[t11, t22, t33, √2·t12]`.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

/// In-plane symmetric second-order tensor (Mandel).
pub type Sym2 = Vector3<f64>;
/// In-plane fourth-order tensor with minor symmetries (Mandel).
pub type Sym4 = Matrix3<f64>;
/// Plane-strain second-order tensor including the 33 component (Mandel).
pub type Sym2Ps = Vector4<f64>;
/// Plane-strain fourth-order tensor (Mandel).
pub type Sym4Ps = Matrix4<f64>;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Mandel weights of the in-plane components.
const W: [f64; 3] = [1.0, 1.0, SQRT2];
/// Index pairs of the in-plane Mandel components.
const PAIRS: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];

/// Builds a Mandel vector from tensor components.
pub fn sym2(t11: f64, t22: f64, t12: f64) -> Sym2 {
    Sym2::new(t11, t22, SQRT2 * t12)
}

/// Tensor components `[t11, t22, t12]` of a Mandel vector.
pub fn components(v: &Sym2) -> [f64; 3] {
    [v[0], v[1], v[2] / SQRT2]
}

/// Tensor component `t_ij` of a Mandel vector.
pub fn component(v: &Sym2, i: usize, j: usize) -> f64 {
    match (i.min(j), i.max(j)) {
        (0, 0) => v[0],
        (1, 1) => v[1],
        (0, 1) => v[2] / SQRT2,
        _ => panic!("in-plane index out of range"),
    }
}

/// Converts a fourth-order component function `c(i, j, k, l)` to Mandel form.
pub fn sym4_from_components(c: impl Fn(usize, usize, usize, usize) -> f64) -> Sym4 {
    Sym4::from_fn(|a, b| {
        let (i, j) = PAIRS[a];
        let (k, l) = PAIRS[b];
        W[a] * W[b] * c(i, j, k, l)
    })
}

/// Fourth-order component `C_ijkl` of a Mandel matrix.
pub fn sym4_component(m: &Sym4, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let index = |p: usize, q: usize| match (p.min(q), p.max(q)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (0, 1) => 2,
        _ => panic!("in-plane index out of range"),
    };
    let a = index(i, j);
    let b = index(k, l);
    m[(a, b)] / (W[a] * W[b])
}

/// Plane-strain isotropic elasticity restricted to the in-plane components.
pub fn isotropic_elasticity(lambda: f64, mu: f64) -> Sym4 {
    Sym4::new(
        lambda + 2.0 * mu,
        lambda,
        0.0,
        lambda,
        lambda + 2.0 * mu,
        0.0,
        0.0,
        0.0,
        2.0 * mu,
    )
}

/// Full plane-strain isotropic elasticity including the 33 row and column.
pub fn isotropic_elasticity_ps(lambda: f64, mu: f64) -> Sym4Ps {
    let d = lambda + 2.0 * mu;
    Sym4Ps::new(
        d, lambda, lambda, 0.0, //
        lambda, d, lambda, 0.0, //
        lambda, lambda, d, 0.0, //
        0.0, 0.0, 0.0, 2.0 * mu,
    )
}

/// Second-order identity in plane-strain Mandel form.
pub fn identity_ps() -> Sym2Ps {
    Sym2Ps::new(1.0, 1.0, 1.0, 0.0)
}

/// Deviatoric projector in plane-strain Mandel form.
pub fn deviatoric_projector_ps() -> Sym4Ps {
    let m = identity_ps();
    Sym4Ps::identity() - m * m.transpose() / 3.0
}

/// Lifts an in-plane strain to plane strain (ε33 = 0).
pub fn lift(v: &Sym2) -> Sym2Ps {
    Sym2Ps::new(v[0], v[1], 0.0, v[2])
}

/// Drops the out-of-plane component.
pub fn in_plane(v: &Sym2Ps) -> Sym2 {
    Sym2::new(v[0], v[1], v[3])
}

/// In-plane block of a plane-strain fourth-order tensor.
pub fn in_plane4(m: &Sym4Ps) -> Sym4 {
    const IDX: [usize; 3] = [0, 1, 3];
    Sym4::from_fn(|a, b| m[(IDX[a], IDX[b])])
}

/// Deviatoric part of a plane-strain tensor.
pub fn deviator(v: &Sym2Ps) -> Sym2Ps {
    let p = (v[0] + v[1] + v[2]) / 3.0;
    Sym2Ps::new(v[0] - p, v[1] - p, v[2] - p, v[3])
}

/// von Mises equivalent stress `sqrt(3/2 s:s)`.
pub fn von_mises(v: &Sym2Ps) -> f64 {
    let s = deviator(v);
    (1.5 * s.dot(&s)).sqrt()
}

//! Geometry of preference-order cones.
//!
//! A preference tuple `(i0, i1, ..., iQ)` over `m` objectives defines the cone
//! of weight vectors
//!
//! ```text
//! S = { s >= 0, s != 0 : s[i0] >= s[i1] >= ... >= s[iQ] }
//! ```
//!
//! A design point satisfies the preference when, for every design axis `j`,
//! the vector of objective partial derivatives `df/dx_j` is orthogonal to some
//! `s` in the cone. [`ConeBasis`] holds the polyhedral normals and the extreme
//! directions of the cone; the orthogonality test reduces to comparing the
//! signs of the projections onto the extreme directions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Ordered objective indices, most important (most stable) first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PreferenceTuple {
    indices: Vec<usize>,
    num_objectives: usize,
}

impl PreferenceTuple {
    pub fn new(indices: Vec<usize>, num_objectives: usize) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::Contract(
                "a preference tuple needs at least two objectives".into(),
            ));
        }
        let mut seen = vec![false; num_objectives];
        for &i in &indices {
            if i >= num_objectives {
                return Err(Error::Contract(format!(
                    "objective index {i} out of range for {num_objectives} objectives"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Contract(format!("objective index {i} repeated")));
            }
        }
        Ok(Self {
            indices,
            num_objectives,
        })
    }

    /// The tuple `(0, 1, ..., q)`.
    pub fn canonical(q: usize, num_objectives: usize) -> Result<Self> {
        Self::new((0..=q).collect(), num_objectives)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn num_objectives(&self) -> usize {
        self.num_objectives
    }

    /// Number of pairwise preferences `Q`.
    pub fn q(&self) -> usize {
        self.indices.len() - 1
    }

    /// `perm[p]` is the objective occupying canonical position `p`: tuple
    /// members first, then the unconstrained objectives in increasing order.
    pub fn permutation(&self) -> Vec<usize> {
        let mut perm = self.indices.clone();
        perm.extend((0..self.num_objectives).filter(|i| !self.indices.contains(i)));
        perm
    }
}

/// Sign tolerance for the membership test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SignTolerance {
    Absolute(f64),
    /// Multiplied by the Euclidean norm of the tested vector.
    Relative(f64),
}

impl Default for SignTolerance {
    fn default() -> Self {
        SignTolerance::Relative(1e-9)
    }
}

impl SignTolerance {
    pub fn resolve(self, v: &[f64]) -> f64 {
        match self {
            SignTolerance::Absolute(t) => t,
            SignTolerance::Relative(r) => r * v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

/// Both representations of a preference cone, in the user's objective order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeBasis {
    tuple: PreferenceTuple,
    polyhedral_normals: Vec<Vec<f64>>,
    extreme_directions: Vec<Vec<f64>>,
    permutation: Vec<usize>,
}

/// Normal `a_(i)` of the canonical cone with `q` preferences.
fn canonical_normal(i: usize, q: usize, m: usize) -> Vec<f64> {
    let mut a = vec![0.0; m];
    if i < q {
        a[i] = std::f64::consts::FRAC_1_SQRT_2;
        a[i + 1] = -std::f64::consts::FRAC_1_SQRT_2;
    } else {
        a[i] = 1.0;
    }
    a
}

/// Extreme direction `ã_(i)` of the canonical cone with `q` preferences.
fn canonical_direction(i: usize, q: usize, m: usize) -> Vec<f64> {
    let mut a = vec![0.0; m];
    if i <= q {
        let w = 1.0 / ((i + 1) as f64).sqrt();
        a[..=i].iter_mut().for_each(|v| *v = w);
    } else {
        a[i] = 1.0;
    }
    a
}

impl ConeBasis {
    pub fn build(tuple: &PreferenceTuple) -> Self {
        let m = tuple.num_objectives();
        let q = tuple.q();
        let perm = tuple.permutation();
        let to_user = |canon: Vec<f64>| {
            let mut v = vec![0.0; m];
            for (p, &obj) in perm.iter().enumerate() {
                v[obj] = canon[p];
            }
            v
        };
        Self {
            polyhedral_normals: (0..m).map(|i| to_user(canonical_normal(i, q, m))).collect(),
            extreme_directions: (0..m).map(|i| to_user(canonical_direction(i, q, m))).collect(),
            permutation: perm,
            tuple: tuple.clone(),
        }
    }

    pub fn tuple(&self) -> &PreferenceTuple {
        &self.tuple
    }

    pub fn num_objectives(&self) -> usize {
        self.tuple.num_objectives()
    }

    /// `a_(i)`: the cone is `{ s : a_(i) . s >= 0 for all i } \ {0}`.
    pub fn polyhedral_normals(&self) -> &[Vec<f64>] {
        &self.polyhedral_normals
    }

    /// `ã_(i)`: the cone is the non-negative span of these, minus the origin.
    pub fn extreme_directions(&self) -> &[Vec<f64>] {
        &self.extreme_directions
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Whether `v` is orthogonal to some member of the cone.
    ///
    /// Projections onto the extreme directions with magnitude at most `tol`
    /// count as zero; `v` passes if its infinity norm is at most `tol` or two
    /// projections have different signs.
    pub fn in_s_perp(&self, v: &[f64], tol: f64) -> bool {
        debug_assert_eq!(v.len(), self.num_objectives());
        if v.iter().all(|x| x.abs() <= tol) {
            return true;
        }
        let mut first: Option<i8> = None;
        for dir in &self.extreme_directions {
            let b: f64 = dir.iter().zip(v).map(|(a, x)| a * x).sum();
            let sign = if b.abs() <= tol { 0 } else if b > 0.0 { 1 } else { -1 };
            match first {
                None => first = Some(sign),
                Some(s) if s != sign => return true,
                _ => {}
            }
        }
        false
    }

    /// [`ConeBasis::in_s_perp`] with the tolerance resolved against `v`.
    pub fn in_s_perp_with(&self, v: &[f64], tol: SignTolerance) -> bool {
        self.in_s_perp(v, tol.resolve(v))
    }
}

/// Whether every design-axis row of `gradients` (n x m, entry `(j, i)` is
/// `d f_i / d x_j`) lies in the perpendicular set of the cone.
pub fn satisfies_preference(gradients: &DMatrix<f64>, basis: &ConeBasis, tol: SignTolerance) -> bool {
    let mut row = vec![0.0; gradients.ncols()];
    (0..gradients.nrows()).all(|j| {
        for (i, r) in row.iter_mut().enumerate() {
            *r = gradients[(j, i)];
        }
        basis.in_s_perp_with(&row, tol)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    #[test]
    fn two_objective_basis() {
        let basis = ConeBasis::build(&PreferenceTuple::canonical(1, 2).unwrap());
        assert!(close(&basis.polyhedral_normals()[0], &[H, -H]));
        assert!(close(&basis.polyhedral_normals()[1], &[0.0, 1.0]));
        assert!(close(&basis.extreme_directions()[0], &[1.0, 0.0]));
        assert!(close(&basis.extreme_directions()[1], &[H, H]));
    }

    #[test]
    fn unconstrained_objective_keeps_its_axis() {
        let basis = ConeBasis::build(&PreferenceTuple::canonical(1, 3).unwrap());
        assert!(close(&basis.extreme_directions()[2], &[0.0, 0.0, 1.0]));
        assert!(close(&basis.polyhedral_normals()[2], &[0.0, 0.0, 1.0]));
    }

    #[test]
    fn tuple_validation() {
        assert!(PreferenceTuple::new(vec![0], 2).is_err());
        assert!(PreferenceTuple::new(vec![0, 0], 2).is_err());
        assert!(PreferenceTuple::new(vec![0, 2], 2).is_err());
        assert_eq!(PreferenceTuple::new(vec![2, 0], 4).unwrap().permutation(), vec![2, 0, 1, 3]);
    }

    #[test]
    fn membership_examples() {
        let basis = ConeBasis::build(&PreferenceTuple::canonical(1, 2).unwrap());
        assert!(basis.in_s_perp(&[0.0, 0.0], 0.0));
        assert!(basis.in_s_perp_with(&[1.0, -1.0], SignTolerance::default()));
        assert!(!basis.in_s_perp_with(&[1.0, 1.0], SignTolerance::default()));
        // exact boundary: b = (1, 0)
        assert!(basis.in_s_perp(&[1.0, -1.0], 0.0));
        // s0 >= s1 cannot balance a larger derivative on the first objective
        assert!(!basis.in_s_perp_with(&[-2.0, 1.0], SignTolerance::default()));
        assert!(basis.in_s_perp_with(&[-1.0, 2.0], SignTolerance::default()));
    }

    #[test]
    fn reversed_tuple_is_axis_swap() {
        let fwd = ConeBasis::build(&PreferenceTuple::new(vec![0, 1], 2).unwrap());
        let rev = ConeBasis::build(&PreferenceTuple::new(vec![1, 0], 2).unwrap());
        for v in [[1.0, -2.0], [-2.0, 1.0], [3.0, 1.0], [0.5, -0.5], [-1.0, 0.1]] {
            assert_eq!(
                fwd.in_s_perp_with(&v, SignTolerance::default()),
                rev.in_s_perp_with(&[v[1], v[0]], SignTolerance::default())
            );
        }
    }

    #[test]
    fn conjunction_over_design_axes() {
        let basis = ConeBasis::build(&PreferenceTuple::canonical(1, 2).unwrap());
        let zero = DMatrix::zeros(3, 2);
        assert!(satisfies_preference(&zero, &basis, SignTolerance::default()));
        let mixed = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, 1.0]);
        assert!(!satisfies_preference(&mixed, &basis, SignTolerance::default()));
    }
}

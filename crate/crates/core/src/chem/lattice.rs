use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ChemError;

/// Periodic cell. Rows of `matrix` are the lattice vectors in Å.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    matrix: Matrix3<f64>,
    inverse: Matrix3<f64>,
}

impl Lattice {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self, ChemError> {
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(ChemError::DegenerateLattice("non-finite entry".into()));
        }
        let det = matrix.determinant();
        if det <= 0.0 {
            return Err(ChemError::DegenerateLattice(format!("determinant {det} is not positive")));
        }
        let inverse = matrix
            .try_inverse()
            .ok_or_else(|| ChemError::DegenerateLattice("singular matrix".into()))?;
        Ok(Lattice { matrix, inverse })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, ChemError> {
        Lattice::new(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn cubic(a: f64) -> Result<Self, ChemError> {
        Lattice::new(Matrix3::from_diagonal_element(a))
    }

    /// Builds a cell from lengths (Å) and angles (degrees): `a` along x, `b` in the xy plane.
    pub fn from_parameters(a: f64, b: f64, c: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self, ChemError> {
        let (ca, cb, cg) = (alpha.to_radians().cos(), beta.to_radians().cos(), gamma.to_radians().cos());
        let sg = gamma.to_radians().sin();
        let gram = gram_determinant(alpha, beta, gamma);
        if gram <= 0.0 || sg <= 0.0 {
            return Err(ChemError::DegenerateLattice(format!(
                "angles ({alpha}, {beta}, {gamma}) do not form a cell"
            )));
        }
        let cy = (ca - cb * cg) / sg;
        let cz = (1.0 - cb * cb - cy * cy).max(0.0).sqrt();
        Lattice::from_rows([
            [a, 0.0, 0.0],
            [b * cg, b * sg, 0.0],
            [c * cb, c * cy, c * cz],
        ])
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.matrix;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn vector(&self, i: usize) -> Vector3<f64> {
        self.matrix.row(i).transpose()
    }

    pub fn lengths(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.vector(i).norm())
    }

    /// Angles (alpha, beta, gamma) in degrees.
    pub fn angles(&self) -> [f64; 3] {
        let angle = |u: Vector3<f64>, v: Vector3<f64>| (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos().to_degrees();
        [
            angle(self.vector(1), self.vector(2)),
            angle(self.vector(0), self.vector(2)),
            angle(self.vector(0), self.vector(1)),
        ]
    }

    pub fn volume(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn to_cartesian(&self, frac: &Vector3<f64>) -> Vector3<f64> {
        self.matrix.transpose() * frac
    }

    pub fn to_fractional(&self, cart: &Vector3<f64>) -> Vector3<f64> {
        self.inverse.transpose() * cart
    }

    /// For each axis, the fractional extent of a unit Cartesian length
    /// (the inverse of the interplanar spacing).
    fn inverse_spacings(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.inverse.column(i).norm())
    }

    /// Visits every periodic image `frac_diff + n` (n integer) whose Cartesian length is
    /// at most `cutoff`. The callback receives the shift `n`, the Cartesian vector and
    /// its length.
    pub fn for_each_image<F>(&self, frac_diff: &Vector3<f64>, cutoff: f64, mut visit: F)
    where
        F: FnMut([i32; 3], Vector3<f64>, f64),
    {
        let h = self.inverse_spacings();
        let range = |i: usize| {
            let reach = cutoff * h[i];
            let lo = (-reach - frac_diff[i]).ceil() as i32;
            let hi = (reach - frac_diff[i]).floor() as i32;
            lo..=hi
        };
        let cutoff2 = cutoff * cutoff;
        let mt = self.matrix.transpose();
        for n0 in range(0) {
            for n1 in range(1) {
                for n2 in range(2) {
                    let f = frac_diff + Vector3::new(n0 as f64, n1 as f64, n2 as f64);
                    let v = mt * f;
                    let d2 = v.norm_squared();
                    if d2 <= cutoff2 {
                        visit([n0, n1, n2], v, d2.sqrt());
                    }
                }
            }
        }
    }

    pub fn supercell(&self, reps: [u32; 3]) -> Result<Lattice, ChemError> {
        let mut m = self.matrix;
        for (i, &r) in reps.iter().enumerate() {
            let scaled = m.row(i) * f64::from(r);
            m.set_row(i, &scaled);
        }
        Lattice::new(m)
    }
}

/// Normalized Gram determinant of a cell with the given angles (degrees); positive for
/// realizable cells.
pub fn gram_determinant(alpha: f64, beta: f64, gamma: f64) -> f64 {
    let (ca, cb, cg) = (alpha.to_radians().cos(), beta.to_radians().cos(), gamma.to_radians().cos());
    1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg
}

impl Serialize for Lattice {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Lattice {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(deserializer)?;
        Lattice::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameters_round_trip() {
        let l = Lattice::from_parameters(4.0, 5.0, 6.0, 80.0, 95.0, 110.0).unwrap();
        let [a, b, c] = l.lengths();
        let [al, be, ga] = l.angles();
        assert!((a - 4.0).abs() < 1e-12 && (b - 5.0).abs() < 1e-12 && (c - 6.0).abs() < 1e-12);
        assert!((al - 80.0).abs() < 1e-9 && (be - 95.0).abs() < 1e-9 && (ga - 110.0).abs() < 1e-9);
        assert!(l.volume() > 0.0);
        // a along x, b in the xy plane
        assert_eq!(l.matrix()[(0, 1)], 0.0);
        assert_eq!(l.matrix()[(0, 2)], 0.0);
        assert_eq!(l.matrix()[(1, 2)], 0.0);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Lattice::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]).is_err());
        assert!(Lattice::from_rows([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(Lattice::from_parameters(3.0, 3.0, 3.0, 60.0, 60.0, 150.0).is_err());
    }

    #[test]
    fn fractional_cartesian_inverse() {
        let l = Lattice::from_parameters(4.0, 7.0, 5.0, 70.0, 100.0, 115.0).unwrap();
        let f = Vector3::new(0.3, -0.2, 1.7);
        let back = l.to_fractional(&l.to_cartesian(&f));
        assert!((back - f).norm() < 1e-12);
    }

    #[test]
    fn image_scan_counts_simple_cubic_shells() {
        let l = Lattice::cubic(2.0).unwrap();
        let mut n = 0;
        l.for_each_image(&Vector3::zeros(), 2.0 + 1e-9, |_, _, d| {
            if d > 0.0 {
                n += 1;
            }
        });
        assert_eq!(n, 6);
    }
}

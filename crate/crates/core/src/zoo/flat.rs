use crate::error::Result;
use crate::model::{Coord, EnergyModel, Matrix};

/// Spring energy `W[x, y] = |y - x|²` on `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatEnergy {
    dim: usize,
}

impl FlatEnergy {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { dim }
    }
}

pub fn flat_energy(dim: usize) -> FlatEnergy {
    FlatEnergy::new(dim)
}

impl EnergyModel for FlatEnergy {
    fn name(&self) -> &str {
        "flat"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&self, x: &Coord, y: &Coord) -> Result<f64> {
        Ok((y - x).norm_squared())
    }

    fn grad1(&self, x: &Coord, y: &Coord) -> Result<Coord> {
        Ok((x - y) * 2.0)
    }

    fn grad2(&self, x: &Coord, y: &Coord) -> Result<Coord> {
        Ok((y - x) * 2.0)
    }

    fn hess11(&self, _x: &Coord, _y: &Coord) -> Result<Matrix> {
        Ok(Matrix::identity(self.dim, self.dim) * 2.0)
    }

    fn hess12(&self, _x: &Coord, _y: &Coord) -> Result<Matrix> {
        Ok(Matrix::identity(self.dim, self.dim) * -2.0)
    }

    fn hess22(&self, _x: &Coord, _y: &Coord) -> Result<Matrix> {
        Ok(Matrix::identity(self.dim, self.dim) * 2.0)
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn derivatives_analytic(&self) -> bool {
        true
    }

    fn reference_metric(&self, _x: &Coord) -> Option<Result<Matrix>> {
        Some(Ok(Matrix::identity(self.dim, self.dim)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::check_consistency;
    use crate::model::coord;

    #[test]
    fn values_and_gradient() {
        let m = flat_energy(2);
        let (a, b) = (coord(&[0.0, 0.0]), coord(&[1.0, 0.0]));
        assert_eq!(m.energy(&a, &b).unwrap(), 1.0);
        assert_eq!(m.grad2(&a, &b).unwrap(), coord(&[2.0, 0.0]));
        assert!(check_consistency(&m, &coord(&[3.0, -1.0]), 1e-12).unwrap().passed());
    }
}

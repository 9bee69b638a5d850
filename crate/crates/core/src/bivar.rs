//! Dense real bivariate polynomials, used for planar expansions and the
//! compactification charts.

use serde::Serialize;

/// Real polynomial in two variables with dense coefficient storage;
/// `coeff(i, j)` multiplies `x^i y^j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BivarPoly {
    max_deg: usize,
    coeffs: Vec<f64>,
}

impl BivarPoly {
    pub fn zero(max_deg: usize) -> Self {
        BivarPoly {
            max_deg,
            coeffs: vec![0.0; (max_deg + 1) * (max_deg + 1)],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.max_deg + 1) + j
    }

    pub fn max_deg(&self) -> usize {
        self.max_deg
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i > self.max_deg || j > self.max_deg {
            0.0
        } else {
            self.coeffs[self.idx(i, j)]
        }
    }

    pub fn add_term(&mut self, i: usize, j: usize, c: f64) {
        assert!(i <= self.max_deg && j <= self.max_deg, "term out of range");
        let k = self.idx(i, j);
        self.coeffs[k] += c;
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        let mut xi = 1.0;
        for i in 0..=self.max_deg {
            let mut yj = 1.0;
            for j in 0..=self.max_deg {
                let c = self.coeffs[i * (self.max_deg + 1) + j];
                if c != 0.0 {
                    acc += c * xi * yj;
                }
                yj *= y;
            }
            xi *= x;
        }
        acc
    }

    pub fn deriv_x(&self) -> BivarPoly {
        let mut out = BivarPoly::zero(self.max_deg);
        for i in 1..=self.max_deg {
            for j in 0..=self.max_deg {
                let c = self.coeff(i, j);
                if c != 0.0 {
                    out.add_term(i - 1, j, c * i as f64);
                }
            }
        }
        out
    }

    pub fn deriv_y(&self) -> BivarPoly {
        let mut out = BivarPoly::zero(self.max_deg);
        for i in 0..=self.max_deg {
            for j in 1..=self.max_deg {
                let c = self.coeff(i, j);
                if c != 0.0 {
                    out.add_term(i, j - 1, c * j as f64);
                }
            }
        }
        out
    }

    pub fn neg(&self) -> BivarPoly {
        BivarPoly {
            max_deg: self.max_deg,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    /// Nonzero terms as `(i, j, coeff)`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.max_deg + 1;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(move |(k, &c)| (k / n, k % n, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_derivs() {
        // 3 x^2 y - y^3
        let mut p = BivarPoly::zero(3);
        p.add_term(2, 1, 3.0);
        p.add_term(0, 3, -1.0);
        assert_eq!(p.eval(2.0, 1.0), 11.0);
        let px = p.deriv_x();
        assert_eq!(px.eval(2.0, 1.0), 12.0);
        let py = p.deriv_y();
        assert_eq!(py.eval(2.0, 1.0), 9.0);
    }
}

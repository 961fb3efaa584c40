//! Truncated Taylor jets in time.
//!
//! A `Jet` carries a field and its first few time derivatives. Arithmetic
//! follows the Leibniz rule, so any polynomial/differential expression in the
//! profiles evaluated on jets yields the expression together with its exact
//! time derivatives. This is how the profile derivatives and the time
//! derivatives of every harmonic amplitude are produced without numerical
//! differentiation.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::field::ComplexField;
use crate::grid::TorusGrid;

/// `terms[k]` is the `k`-th time derivative.
#[derive(Debug, Clone)]
pub struct Jet {
    terms: Vec<ComplexField>,
}

impl Jet {
    pub fn new(terms: Vec<ComplexField>) -> Self {
        assert!(!terms.is_empty(), "a jet needs at least its value");
        Jet { terms }
    }

    pub fn constant(f: ComplexField) -> Self {
        Jet { terms: vec![f] }
    }

    pub fn zeros(grid: &Arc<TorusGrid>, order: usize) -> Self {
        Jet {
            terms: vec![ComplexField::zeros(grid); order + 1],
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        use crate::field::Spectral;
        self.terms[0].grid()
    }

    /// Highest derivative carried.
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn value(&self) -> &ComplexField {
        &self.terms[0]
    }

    pub fn term(&self, k: usize) -> &ComplexField {
        &self.terms[k]
    }

    pub fn terms(&self) -> &[ComplexField] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<ComplexField> {
        self.terms
    }

    pub fn truncate(&self, order: usize) -> Jet {
        Jet {
            terms: self.terms[..=order.min(self.order())].to_vec(),
        }
    }

    /// Time derivative: drops the value, order decreases by one.
    pub fn dt(&self) -> Jet {
        assert!(self.order() >= 1, "cannot differentiate an order-0 jet");
        Jet {
            terms: self.terms[1..].to_vec(),
        }
    }

    /// Prepends a value whose derivative is `self`.
    pub fn integrate_with(&self, value: ComplexField) -> Jet {
        let mut terms = Vec::with_capacity(self.terms.len() + 1);
        terms.push(value);
        terms.extend(self.terms.iter().cloned());
        Jet { terms }
    }

    fn zip_map(&self, other: &Jet, f: impl Fn(&ComplexField, &ComplexField) -> ComplexField) -> Jet {
        let k = self.order().min(other.order());
        Jet {
            terms: (0..=k).map(|i| f(&self.terms[i], &other.terms[i])).collect(),
        }
    }

    fn map(&self, f: impl Fn(&ComplexField) -> ComplexField) -> Jet {
        Jet {
            terms: self.terms.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, a: Complex64) -> Jet {
        self.map(|f| f.scale(a))
    }

    pub fn scale_re(&self, a: f64) -> Jet {
        self.scale(Complex64::new(a, 0.0))
    }

    pub fn conj(&self) -> Jet {
        self.map(|f| f.conj())
    }

    pub fn laplacian(&self) -> Jet {
        self.map(|f| f.laplacian())
    }

    pub fn gradient(&self) -> [Jet; 2] {
        let (a, b): (Vec<_>, Vec<_>) = self
            .terms
            .iter()
            .map(|f| {
                let [x, y] = f.gradient();
                (x, y)
            })
            .unzip();
        [Jet { terms: a }, Jet { terms: b }]
    }

    /// Dealiased triple product with the trinomial Leibniz rule.
    pub fn cube(a: &Jet, b: &Jet, c: &Jet) -> Jet {
        use crate::field::Spectral;
        let order = a.order().min(b.order()).min(c.order());
        let grid = Arc::clone(a.grid());
        let mut terms = Vec::with_capacity(order + 1);
        for m in 0..=order {
            let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
            for i in 0..=m {
                for j in 0..=(m - i) {
                    let k = m - i - j;
                    let w = trinomial(m, i, j, k);
                    let s = grid.cube_spectra(
                        a.terms[i].spectrum(),
                        b.terms[j].spectrum(),
                        c.terms[k].spectrum(),
                    );
                    for (x, y) in acc.iter_mut().zip(s) {
                        *x += y * w;
                    }
                }
            }
            terms.push(ComplexField::from_spectrum(&grid, acc));
        }
        Jet { terms }
    }

    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(|f| f.is_finite())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn trinomial(m: usize, i: usize, j: usize, k: usize) -> f64 {
    factorial(m) / (factorial(i) * factorial(j) * factorial(k))
}

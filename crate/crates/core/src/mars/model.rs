//! Fitted spline model: hinge basis functions and their linear combination.

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};

/// Which side of the knot a hinge is live on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HingeDirection {
    /// `max(0, x - knot)`: zero up to the knot, linear above it.
    Positive,
    /// `max(0, knot - x)`: the mirror image.
    Mirror,
}

/// A single hockey-stick basis factor on one predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HingeTerm {
    /// 0-based predictor index.
    #[serde(rename = "var")]
    pub variable: usize,
    /// Threshold in (standardized) predictor units. Always finite.
    pub knot: f64,
    #[serde(rename = "dir")]
    pub direction: HingeDirection,
}

/// Evaluates one hinge. Inputs must be finite.
pub fn hinge_eval(x: f64, knot: f64, direction: HingeDirection) -> Result<f64> {
    if !x.is_finite() || !knot.is_finite() {
        return Err(Error::NonFinite(format!(
            "hinge inputs x={x}, knot={knot}"
        )));
    }
    Ok(hinge_value(x, knot, direction))
}

#[inline]
pub(crate) fn hinge_value(x: f64, knot: f64, direction: HingeDirection) -> f64 {
    match direction {
        HingeDirection::Positive => (x - knot).max(0.0),
        HingeDirection::Mirror => (knot - x).max(0.0),
    }
}

/// A product of hinge factors; degree-1 bases have a single factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisFunction {
    pub factors: Vec<HingeTerm>,
}

impl BasisFunction {
    pub fn new(factors: Vec<HingeTerm>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Shape("basis function needs at least one factor".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            if !f.knot.is_finite() {
                return Err(Error::NonFinite(format!("knot of factor {i}")));
            }
            for g in &factors[..i] {
                if g.variable == f.variable {
                    return Err(Error::Shape(format!(
                        "two factors on predictor {}",
                        f.variable
                    )));
                }
            }
        }
        Ok(BasisFunction { factors })
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn max_variable(&self) -> usize {
        self.factors.iter().map(|f| f.variable).max().unwrap_or(0)
    }

    /// Product of factor values over one predictor row. Never negative.
    pub fn eval(&self, row: &[f64]) -> Result<f64> {
        let mut prod = 1.0;
        for f in &self.factors {
            let x = *row.get(f.variable).ok_or_else(|| {
                Error::Shape(format!(
                    "basis references predictor {} but row has {}",
                    f.variable,
                    row.len()
                ))
            })?;
            if !x.is_finite() {
                return Err(Error::NonFinite(format!("predictor {}", f.variable)));
            }
            prod *= hinge_value(x, f.knot, f.direction);
            if prod == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(prod)
    }
}

/// One weighted basis function of a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelTerm {
    #[serde(rename = "coef")]
    pub coefficient: f64,
    pub basis: BasisFunction,
}

/// Training-fit diagnostics carried by a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub fit_mse: f64,
    /// Generalized cross-validation score; +inf when the model had more
    /// effective parameters than samples.
    #[serde(with = "json_f64")]
    pub fit_gcv: f64,
    /// Number of distinct (predictor, knot) pairs across all terms.
    pub knot_count: usize,
}

/// A fitted spline model: intercept plus weighted hinge products.
///
/// Immutable once constructed; evaluation is safe from many threads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarsModel {
    pub intercept: f64,
    pub terms: Vec<ModelTerm>,
    pub n_predictors: usize,
    pub diagnostics: FitDiagnostics,
}

impl MarsModel {
    /// A model with no terms: predicts `intercept` everywhere.
    pub fn constant(intercept: f64, n_predictors: usize, fit_mse: f64, fit_gcv: f64) -> Self {
        MarsModel {
            intercept,
            terms: Vec::new(),
            n_predictors,
            diagnostics: FitDiagnostics {
                fit_mse,
                fit_gcv,
                knot_count: 0,
            },
        }
    }

    pub fn new(
        intercept: f64,
        terms: Vec<ModelTerm>,
        n_predictors: usize,
        fit_mse: f64,
        fit_gcv: f64,
    ) -> Result<Self> {
        for t in &terms {
            if t.basis.max_variable() >= n_predictors {
                return Err(Error::Shape(format!(
                    "basis references predictor {} but model has {}",
                    t.basis.max_variable(),
                    n_predictors
                )));
            }
        }
        let knot_count = count_knots(&terms);
        Ok(MarsModel {
            intercept,
            terms,
            n_predictors,
            diagnostics: FitDiagnostics {
                fit_mse,
                fit_gcv,
                knot_count,
            },
        })
    }

    pub fn knot_count(&self) -> usize {
        self.diagnostics.knot_count
    }

    /// Prediction for a single predictor row.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_predictors {
            return Err(Error::Shape(format!(
                "row has {} predictors, model expects {}",
                row.len(),
                self.n_predictors
            )));
        }
        let mut acc = self.intercept;
        for t in &self.terms {
            acc += t.coefficient * t.basis.eval(row)?;
        }
        Ok(acc)
    }

    /// Row-wise prediction over a design matrix.
    pub fn predict_batch(&self, rows: &Matrix) -> Result<Vec<f64>> {
        if rows.rows() == 0 {
            return Ok(Vec::new());
        }
        if rows.cols() != self.n_predictors {
            return Err(Error::Shape(format!(
                "matrix has {} predictors, model expects {}",
                rows.cols(),
                self.n_predictors
            )));
        }
        let out = exec::map_indexed(rows.rows(), |i| self.predict(rows.row(i)));
        out.into_iter().collect()
    }

    /// Serializes to the documented JSON form. Finite values render with
    /// shortest round-trip decimals, so `from_json` restores them exactly.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: MarsModel =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("model JSON: {e}")))?;
        let expected = count_knots(&model.terms);
        if model.diagnostics.knot_count != expected {
            return Err(Error::Data(format!(
                "knot_count {} does not match terms ({} distinct knots)",
                model.diagnostics.knot_count, expected
            )));
        }
        for t in &model.terms {
            if t.basis.max_variable() >= model.n_predictors {
                return Err(Error::Data("basis predictor out of range".into()));
            }
        }
        Ok(model)
    }
}

pub(crate) fn count_knots(terms: &[ModelTerm]) -> usize {
    let mut seen: Vec<(usize, f64)> = Vec::new();
    for t in terms {
        for f in &t.basis.factors {
            if !seen
                .iter()
                .any(|&(v, k)| v == f.variable && k == f.knot)
            {
                seen.push((f.variable, f.knot));
            }
        }
    }
    seen.len()
}

/// Serializes possibly non-finite `f64` diagnostics: finite values as JSON
/// numbers, the rest as strings, so round-tripping never loses a model.
mod json_f64 {
    use serde::{self, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Tag(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!(
                    "unknown float tag {other:?}"
                ))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hinge(variable: usize, knot: f64, direction: HingeDirection) -> HingeTerm {
        HingeTerm {
            variable,
            knot,
            direction,
        }
    }

    #[test]
    fn hinge_eval_matches_threshold_semantics() {
        assert_eq!(hinge_eval(30.0, 10.0, HingeDirection::Positive).unwrap(), 20.0);
        assert_eq!(hinge_eval(5.0, 10.0, HingeDirection::Positive).unwrap(), 0.0);
        assert_eq!(hinge_eval(5.0, 10.0, HingeDirection::Mirror).unwrap(), 5.0);
        assert!(hinge_eval(f64::NAN, 0.0, HingeDirection::Positive).is_err());
        assert!(hinge_eval(0.0, f64::INFINITY, HingeDirection::Mirror).is_err());
    }

    #[test]
    fn basis_eval_is_the_product_of_factors() {
        let single = BasisFunction::new(vec![hinge(0, 0.0, HingeDirection::Positive)]).unwrap();
        assert_eq!(single.eval(&[3.0]).unwrap(), 3.0);

        let pair = BasisFunction::new(vec![
            hinge(0, 1.0, HingeDirection::Positive),
            hinge(1, 2.0, HingeDirection::Mirror),
        ])
        .unwrap();
        assert_eq!(pair.eval(&[3.0, 1.0]).unwrap(), 2.0);

        // One factor below its Positive knot annihilates the product.
        assert_eq!(pair.eval(&[0.5, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn basis_rejects_duplicate_variables_and_bad_indices() {
        assert!(BasisFunction::new(vec![
            hinge(0, 0.0, HingeDirection::Positive),
            hinge(0, 1.0, HingeDirection::Mirror),
        ])
        .is_err());
        assert!(BasisFunction::new(Vec::new()).is_err());

        let b = BasisFunction::new(vec![hinge(3, 0.0, HingeDirection::Positive)]).unwrap();
        assert!(b.eval(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_term_model_is_constant() {
        let m = MarsModel::constant(1.5, 4, 0.0, 0.0);
        assert_eq!(m.predict(&[0.0, 1.0, -5.0, 2.0]).unwrap(), 1.5);
        assert_eq!(m.predict(&[9.0, -1.0, 0.0, 0.3]).unwrap(), 1.5);
    }

    #[test]
    fn single_term_model_prediction() {
        let m = MarsModel::new(
            0.0,
            vec![ModelTerm {
                coefficient: 2.0,
                basis: BasisFunction::new(vec![hinge(0, 0.3, HingeDirection::Positive)]).unwrap(),
            }],
            1,
            0.0,
            0.0,
        )
        .unwrap();
        assert!((m.predict(&[0.8]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn predict_batch_matches_looped_predict() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = MarsModel::new(
            0.7,
            vec![
                ModelTerm {
                    coefficient: 1.3,
                    basis: BasisFunction::new(vec![hinge(0, 0.1, HingeDirection::Positive)])
                        .unwrap(),
                },
                ModelTerm {
                    coefficient: -0.5,
                    basis: BasisFunction::new(vec![hinge(2, -0.4, HingeDirection::Mirror)])
                        .unwrap(),
                },
            ],
            3,
            0.0,
            0.0,
        )
        .unwrap();

        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let batch = m.predict_batch(&x).unwrap();
        assert_eq!(batch.len(), 100);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(batch[i], m.predict(row).unwrap());
        }

        let empty = Matrix::zeros(0, 3);
        assert!(m.predict_batch(&empty).unwrap().is_empty());
        let one = Matrix::from_rows(&[rows[0].clone()]).unwrap();
        assert_eq!(m.predict_batch(&one).unwrap(), vec![m.predict(&rows[0]).unwrap()]);
    }

    #[test]
    fn prediction_is_piecewise_linear_in_one_predictor() {
        let m = MarsModel::new(
            0.2,
            vec![
                ModelTerm {
                    coefficient: 1.0,
                    basis: BasisFunction::new(vec![hinge(0, 0.5, HingeDirection::Positive)])
                        .unwrap(),
                },
                ModelTerm {
                    coefficient: -2.0,
                    basis: BasisFunction::new(vec![hinge(0, -0.5, HingeDirection::Mirror)])
                        .unwrap(),
                },
            ],
            2,
            0.0,
            0.0,
        )
        .unwrap();
        // Second differences on a uniform grid vanish except where a knot
        // falls inside the stencil.
        let h = 0.01;
        for step in 0..400 {
            let x = -2.0 + h * step as f64;
            let in_stencil =
                |knot: f64| (x - h - 1e-9..=x + h + 1e-9).contains(&knot);
            if in_stencil(0.5) || in_stencil(-0.5) {
                continue;
            }
            let f = |x: f64| m.predict(&[x, 0.3]).unwrap();
            let second = f(x + h) - 2.0 * f(x) + f(x - h);
            assert!(second.abs() < 1e-12, "x={x} second={second}");
        }
    }

    #[test]
    fn json_round_trip_preserves_model() {
        let m = MarsModel::new(
            -0.125,
            vec![ModelTerm {
                coefficient: 0.1 + 0.2, // deliberately non-representable sum
                basis: BasisFunction::new(vec![
                    hinge(1, 0.3333333333333333, HingeDirection::Mirror),
                    hinge(0, -1.5, HingeDirection::Positive),
                ])
                .unwrap(),
            }],
            2,
            0.015625,
            0.017,
        )
        .unwrap();
        let text = m.to_json();
        let back = MarsModel::from_json(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn json_round_trip_with_infinite_gcv() {
        let m = MarsModel::constant(2.0, 1, 0.0, f64::INFINITY);
        let back = MarsModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.diagnostics.fit_gcv, f64::INFINITY);
    }

    proptest! {
        #[test]
        fn hinge_pair_sums_to_absolute_distance(
            x in -1e6_f64..1e6,
            knot in -1e6_f64..1e6,
        ) {
            let pos = hinge_eval(x, knot, HingeDirection::Positive).unwrap();
            let mir = hinge_eval(x, knot, HingeDirection::Mirror).unwrap();
            prop_assert!(pos >= 0.0 && mir >= 0.0);
            prop_assert_eq!(pos + mir, (x - knot).abs());
        }

        #[test]
        fn hinge_is_nonexpansive(
            x1 in -1e6_f64..1e6,
            x2 in -1e6_f64..1e6,
            knot in -1e6_f64..1e6,
        ) {
            let f1 = hinge_eval(x1, knot, HingeDirection::Positive).unwrap();
            let f2 = hinge_eval(x2, knot, HingeDirection::Positive).unwrap();
            // Exact in reals; allow rounding of the two subtractions.
            let slack = 8.0 * f64::EPSILON * (x1.abs() + x2.abs() + knot.abs());
            prop_assert!((f1 - f2).abs() <= (x1 - x2).abs() + slack);
        }

        #[test]
        fn json_round_trip_is_value_exact(
            intercept in proptest::num::f64::NORMAL | proptest::num::f64::ZERO,
            coef in proptest::num::f64::NORMAL | proptest::num::f64::ZERO,
            knot in -1e12_f64..1e12,
            mse in 0.0_f64..1e12,
        ) {
            let m = MarsModel::new(
                intercept,
                vec![ModelTerm {
                    coefficient: coef,
                    basis: BasisFunction::new(
                        vec![hinge(0, knot, HingeDirection::Positive)],
                    ).unwrap(),
                }],
                1,
                mse,
                mse * 1.25,
            ).unwrap();
            let back = MarsModel::from_json(&m.to_json()).unwrap();
            prop_assert_eq!(m, back);
        }
    }
}

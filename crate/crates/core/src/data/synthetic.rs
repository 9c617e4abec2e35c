//! Seeded stand-ins for the public datasets. Features are drawn in
//! normalized space, mapped back to the attribute ranges, and labelled by a
//! hidden noisy logistic rule with one curved term so that the MLP has
//! something nonlinear to learn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{denormalize, AttributeKind, DatasetName, DatasetSpec, Instance};
use crate::Label;

struct LatentRule {
    weights: Vec<f64>,
    /// Coefficient on `(x0 - 0.5)^2`.
    curvature: f64,
    bias: f64,
}

fn rule_for(spec: &DatasetSpec) -> LatentRule {
    let n = spec.n_features();
    match spec.name {
        DatasetName::WineQuality if n == 5 => LatentRule {
            weights: vec![-5.0, -1.5, -1.0, 4.0, 7.0],
            curvature: -6.0,
            bias: 0.3,
        },
        DatasetName::AdultIncome if n == 5 => LatentRule {
            weights: vec![3.0, 6.0, 3.0, 1.5, 14.0],
            curvature: -8.0,
            bias: -5.5,
        },
        DatasetName::ForestCover if n == 5 => LatentRule {
            weights: vec![-10.0, 1.0, -2.0, -3.0, 1.5],
            curvature: 5.0,
            bias: 6.0,
        },
        _ => {
            let weights: Vec<f64> = (0..n)
                .map(|r| {
                    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                    sign * 6.0 / (1.0 + 0.35 * r as f64)
                })
                .collect();
            let bias = -weights.iter().sum::<f64>() * 0.5;
            LatentRule {
                weights,
                curvature: -4.0,
                bias: bias + 1.0,
            }
        }
    }
}

fn sample_norm(spec: &DatasetSpec, r: usize, rng: &mut ChaCha8Rng) -> f64 {
    let attr = &spec.attributes[r];
    if attr.kind == AttributeKind::CategoricalBinary {
        return if rng.random_bool(0.5) { 1.0 } else { 0.0 };
    }
    // Capital gain is zero for most people.
    if spec.name == DatasetName::AdultIncome && r == 4 && rng.random_bool(0.8) {
        return 0.0;
    }
    let normal = Normal::new(0.5_f64, 0.2).expect("valid normal");
    let v: f64 = normal.sample(rng);
    v.clamp(0.0, 1.0)
}

/// Generates `n` labelled instances; a pure function of `(spec, n, seed)`.
pub fn generate(spec: &DatasetSpec, n: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = rule_for(spec);
    let prefix = format!("{:?}", spec.name).to_ascii_lowercase();
    (0..n)
        .map(|i| {
            let norm: Vec<f64> = (0..spec.n_features()).map(|r| sample_norm(spec, r, &mut rng)).collect();
            let score = rule.bias
                + rule.weights.iter().zip(&norm).map(|(w, x)| w * x).sum::<f64>()
                + rule.curvature * (norm[0] - 0.5).powi(2);
            let p2 = 1.0 / (1.0 + (-score).exp());
            let label = if rng.random::<f64>() < p2 {
                Label::Two
            } else {
                Label::One
            };
            let mut raw = denormalize(&norm, spec);
            for (v, a) in raw.iter_mut().zip(&spec.attributes) {
                if a.kind == AttributeKind::CategoricalBinary {
                    *v = v.round();
                }
            }
            Instance::new(format!("{prefix}-{i}"), raw, spec, Some(label)).expect("generated rows match the spec")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_rows_respect_spec() {
        for spec in [
            DatasetSpec::wine_quality(),
            DatasetSpec::adult_income(),
            DatasetSpec::forest_cover(),
            DatasetSpec::synthetic(9),
        ] {
            let rows = generate(&spec, 400, 3);
            assert_eq!(rows.len(), 400);
            let twos = rows.iter().filter(|r| r.label == Some(Label::Two)).count();
            assert!((60..=340).contains(&twos), "{:?} has {twos} label-2 rows", spec.name);
            for r in &rows {
                assert_eq!(r.norm.len(), spec.n_features());
                assert!(r.norm.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn deterministic() {
        let spec = DatasetSpec::wine_quality();
        assert_eq!(generate(&spec, 20, 1), generate(&spec, 20, 1));
    }
}

//! Exact reference computations in rational arithmetic.

use boruta_core::forest::NodeRecord;
use boruta_core::Decision;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Adds `gain * count` of every split below `node` to `acc`, recursing on the
/// nested record.
fn accumulate(node: &NodeRecord, acc: &mut [BigRational]) {
    if let Some(feature) = node.split_feature {
        acc[feature] += exact(node.gain.unwrap()) * BigRational::from_integer(BigInt::from(node.instance_count));
        for child in &node.children {
            accumulate(child, acc);
        }
    }
}

/// Impurity importance by walking every tree record.
pub fn impurity(trees: &[NodeRecord], p: usize) -> Vec<f64> {
    let mut avg = vec![BigRational::zero(); p];
    for tree in trees {
        let mut acc = vec![BigRational::zero(); p];
        accumulate(tree, &mut acc);
        let total: BigRational = acc.iter().cloned().sum();
        for (a, g) in avg.iter_mut().zip(acc) {
            if !total.is_zero() {
                *a += g / &total;
            }
        }
    }
    let m = BigRational::from_integer(BigInt::from(trees.len()));
    avg.iter_mut().for_each(|a| *a = &*a / &m);
    let total: BigRational = avg.iter().cloned().sum();
    avg.into_iter()
        .map(|a| if total.is_zero() { a } else { a / &total })
        .map(|a| a.to_f64().unwrap())
        .collect()
}

fn choose(n: u32, k: u32) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

/// Exact `P[Bin(t, 1/2) >= h]` and `P[Bin(t, 1/2) <= h]`.
pub fn binomial_tails(h: u32, t: u32) -> (BigRational, BigRational) {
    let denom = BigInt::from(1u128 << t);
    let upper: u128 = (h..=t).map(|i| choose(t, i)).sum();
    let lower: u128 = (0..=h).map(|i| choose(t, i)).sum();
    (
        BigRational::new(BigInt::from(upper), denom.clone()),
        BigRational::new(BigInt::from(lower), denom),
    )
}

/// Decision for `h` hits out of `t` at the per-test `level`.
pub fn decision(h: u32, t: u32, level: f64) -> Decision {
    let level = BigRational::from_float(level).unwrap();
    let (upper, lower) = binomial_tails(h, t);
    if upper < level {
        Decision::Accept
    } else if lower < level {
        Decision::Reject
    } else {
        Decision::KeepUndecided
    }
}

/// Position of a decision on the reject < undecided < accept scale.
pub fn order(d: Decision) -> u8 {
    match d {
        Decision::Reject => 0,
        Decision::KeepUndecided => 1,
        Decision::Accept => 2,
    }
}

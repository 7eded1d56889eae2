//! Checks against values obtained independently of the library: brute-force searches
//! and reference numbers computed with external tools.

use approx::assert_abs_diff_eq;

use taskrd::classify::{ec_curve, effective_distortion, iec_curve, ord_curve, stats, ConfusionMatrix};
use taskrd::curve::linspace;
use taskrd::{ba_point, BaConfig, Channel, DistortionMatrix, LambdaGrid, Pmf, RdCurve, RdPoint};

fn mutual_information_bits(p: &[f64], w: &[[f64; 3]; 3]) -> f64 {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[j] += p[i] * w[i][j];
        }
    }
    let mut mi = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if w[i][j] > 0.0 {
                mi += p[i] * w[i][j] * (w[i][j] / out[j]).log2();
            }
        }
    }
    mi
}

/// Smallest mutual information over a grid of 3x3 channels with Hamming distortion at
/// most `d`. Row `i` keeps its symbol with probability `1 - e_i` and splits the error
/// between the two other symbols in proportion `s_i : 1 - s_i`.
fn brute_force_hamming_rd(p: &[f64], d: f64) -> f64 {
    let errs: Vec<Vec<f64>> = p
        .iter()
        .map(|&pi| linspace(0.0, (d / pi).min(1.0), 26))
        .collect();
    let splits = linspace(0.0, 1.0, 11);
    let mut best = f64::INFINITY;
    for &e0 in &errs[0] {
        for &e1 in &errs[1] {
            for &e2 in &errs[2] {
                if p[0] * e0 + p[1] * e1 + p[2] * e2 > d + 1e-15 {
                    continue;
                }
                for &s0 in &splits {
                    for &s1 in &splits {
                        for &s2 in &splits {
                            let w = [
                                [1.0 - e0, e0 * s0, e0 * (1.0 - s0)],
                                [e1 * s1, 1.0 - e1, e1 * (1.0 - s1)],
                                [e2 * s2, e2 * (1.0 - s2), 1.0 - e2],
                            ];
                            best = best.min(mutual_information_bits(p, &w));
                        }
                    }
                }
            }
        }
    }
    best
}

#[test]
fn skewed_three_class_oracle_matches_brute_force() {
    let prior = Pmf::new(vec![0.7, 0.2, 0.1]).unwrap();
    let d = 0.05;
    // H(p) - h(d) - d log2(K - 1), evaluated independently; exact for d <= (K-1) min p.
    let reference = 0.8203826923310832;
    let curve = ord_curve(&prior, &[d], &BaConfig::default()).unwrap();
    assert_abs_diff_eq!(curve.points[0].rate, reference, epsilon = 1e-6);

    let searched = brute_force_hamming_rd(prior.probs(), d);
    assert!(searched >= reference - 1e-9, "grid search beat the bound: {searched}");
    assert!(searched <= reference + 5e-2, "grid search too coarse: {searched}");
}

#[test]
fn imagenet_and_cifar_floors() {
    // Uniform-prior closed form evaluated independently.
    let imagenet = ord_curve(&Pmf::uniform(1000).unwrap(), &[0.239], &BaConfig::default()).unwrap();
    assert_abs_diff_eq!(imagenet.points[0].rate, 6.790933461, epsilon = 1e-8);
    let cifar = ord_curve(&Pmf::uniform(100).unwrap(), &[0.26], &BaConfig::default()).unwrap();
    assert_abs_diff_eq!(cifar.points[0].rate, 4.093477096, epsilon = 1e-8);
}

/// A classifier that over-predicts class 1, so the most frequent estimate is not the
/// most likely class.
fn biased_classifier() -> ConfusionMatrix {
    ConfusionMatrix::from_rows(
        &[
            vec![0.3, 0.6, 0.1],
            vec![0.0, 1.0, 0.0],
            vec![0.1, 0.2, 0.7],
        ],
        Pmf::new(vec![0.5, 0.3, 0.2]).unwrap(),
    )
    .unwrap()
}

fn lowest_lambda_point(c: &RdCurve) -> &RdPoint {
    c.points
        .iter()
        .min_by(|a, b| a.lambda.unwrap().total_cmp(&b.lambda.unwrap()))
        .unwrap()
}

#[test]
fn zero_rate_limits_match_best_constant_decoders() {
    let cm = biased_classifier();
    let s = stats(&cm);
    let prior = cm.prior().probs();
    let k = cm.classes();

    // E&C at zero rate: the constant reconstruction that minimises the Hamming error on
    // the estimate, scored on the true class.
    let ec_choice = (0..k)
        .min_by(|&a, &b| {
            (1.0 - s.estimate_marginal.probs()[a]).total_cmp(&(1.0 - s.estimate_marginal.probs()[b]))
        })
        .unwrap();
    let ec_zero = 1.0 - prior[ec_choice];
    // iE&C at zero rate: the constant reconstruction that minimises the task error.
    let iec_zero = (0..k).map(|c| 1.0 - prior[c]).fold(f64::INFINITY, f64::min);
    assert_abs_diff_eq!(ec_zero, 0.7, epsilon = 1e-12);
    assert_abs_diff_eq!(iec_zero, s.d_zero, epsilon = 1e-12);

    let grid = LambdaGrid::log(1e-3, 1e3, 40).values().unwrap();
    let cfg = BaConfig::default();
    let ec = ec_curve(&cm, &grid, &cfg).unwrap();
    let iec = iec_curve(&cm, &grid, &cfg).unwrap();
    let (e, i) = (lowest_lambda_point(&ec), lowest_lambda_point(&iec));
    assert!(e.rate < 1e-9 && i.rate < 1e-9);
    assert_abs_diff_eq!(e.distortion, ec_zero, epsilon = 1e-9);
    assert_abs_diff_eq!(i.distortion, iec_zero, epsilon = 1e-9);
}

#[test]
fn binary_symmetric_effective_distortion_and_endpoint() {
    let eps = 0.1587;
    let cm = ConfusionMatrix::binary_symmetric(eps).unwrap();
    let s = stats(&cm);
    let dhat = effective_distortion(&s);
    for a in 0..2 {
        for b in 0..2 {
            let expected = if a == b { eps } else { 1.0 - eps };
            assert_abs_diff_eq!(dhat.get(a, b), expected, epsilon = 1e-12);
            assert_abs_diff_eq!(s.posterior.get(a, b), cm.channel().get(b, a), epsilon = 1e-12);
        }
    }
    let top = ba_point(cm.prior(), &dhat, &BaConfig::default().with_lambda(200.0)).unwrap();
    assert_abs_diff_eq!(top.rate, 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(top.distortion, eps, epsilon = 1e-6);
}

#[test]
fn ba_matches_hand_solved_erasure_style_problem() {
    // Three source symbols, two reconstructions; the middle symbol costs the same either
    // way, so its row carries no information. At large λ the outer symbols map to their
    // free reconstruction: rate = P(outer) * 1 bit = 0.5, distortion = P(middle) = 0.5.
    // Swapping the reconstructions mirrors the channel.
    let src = Pmf::new(vec![0.25, 0.5, 0.25]).unwrap();
    let d = DistortionMatrix::from_rows(vec![vec![0.0, 2.0], vec![1.0, 1.0], vec![2.0, 0.0]])
        .unwrap();
    let r = ba_point(&src, &d, &BaConfig::default().with_lambda(40.0)).unwrap();
    assert_abs_diff_eq!(r.rate, 0.5, epsilon = 1e-9);
    assert_abs_diff_eq!(r.distortion, 0.5, epsilon = 1e-9);
    let w = &r.channel;
    assert_abs_diff_eq!(w.get(1, 0), 0.5, epsilon = 1e-12);
    let flipped = Channel::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    assert_abs_diff_eq!(w.then(&flipped).unwrap().get(0, 1), w.get(0, 0), epsilon = 1e-12);
}

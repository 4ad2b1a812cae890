use wrelm::elm::{self, logistic_exact, logistic_pade, pade_exp, InputWeights, DEFAULT_SEED};
use wrelm::rng::SeededRng;
use wrelm::Activation;

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

fn max_gap(lo: f64, hi: f64) -> f64 {
    grid(lo, hi, 100_000).map(|y| (logistic_pade(y) - logistic_exact(y)).abs()).fold(0.0, f64::max)
}

#[test]
fn pade_accuracy_bands() {
    assert!(max_gap(-2.0, 2.0) <= 2e-4);
    assert!(max_gap(-3.0, 3.0) <= 2e-3);
    assert_eq!(logistic_pade(0.0), 0.5);
    assert_eq!(logistic_exact(0.0), 0.5);
}

#[test]
fn pade_exp_known_values() {
    assert_eq!(pade_exp(0.0), 1.0);
    assert!((pade_exp(2.0) - 296.0 / 40.0).abs() < 1e-14);
    assert!((pade_exp(3.0) - 435.0 / 21.0).abs() < 1e-13);
    assert!((pade_exp(2.0) - 2f64.exp()).abs() < 0.012);
}

#[test]
fn closed_form_agrees_with_reciprocal_form() {
    for y in grid(-4.0, 4.0, 10_001) {
        let direct = 1.0 / (1.0 + pade_exp(y));
        let closed = logistic_pade(y);
        assert!((direct - closed).abs() <= 1e-13 * closed.abs(), "y = {y}");
    }
}

#[test]
fn logistic_symmetry() {
    for y in grid(-6.0, 6.0, 2001) {
        assert!((logistic_exact(-y) - (1.0 - logistic_exact(y))).abs() < 1e-15);
        assert!((logistic_pade(-y) - (1.0 - logistic_pade(y))).abs() < 1e-15);
        // decreasing in y: G(y) = 1 / (1 + e^y)
        assert!(logistic_exact(y + 1e-3) < logistic_exact(y));
    }
}

#[test]
fn pade_range_within_validated_domain() {
    for y in grid(-4.0, 4.0, 8001) {
        let g = logistic_pade(y);
        assert!(g > 0.0 && g < 1.0, "y = {y}");
    }
}

#[test]
fn hidden_rows_pade_vs_exact_inside_validated_band() {
    // default input weights on random scaled rows; every pre-activation with
    // |y| <= 3 must agree within the band bound
    let w = InputWeights::generate(DEFAULT_SEED, 6, 64).unwrap();
    let mut rng = SeededRng::new(5);
    let mut checked = 0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..6).map(|_| rng.uniform()).collect();
        let pade = elm::hidden_row(&w, &x, Activation::Pade).unwrap();
        let exact = elm::hidden_row(&w, &x, Activation::Exact).unwrap();
        for i in 0..64 {
            let y: f64 = (0..6).map(|j| x[j] * w.matrix()[(j, i)]).sum();
            if y.abs() <= 3.0 {
                assert!((pade[i] - exact[i]).abs() <= 2e-3);
                checked += 1;
            }
        }
    }
    assert!(checked > 30_000);
}

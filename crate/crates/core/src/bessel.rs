//! Bessel functions of the first kind, J_n(x), for the phase-modulation
//! harmonic expansion.
//!
//! The shelf model needs the whole sequence J_0..J_N at a single large
//! argument (modulation depths of a few hundred radians), so this uses
//! Miller's backward recurrence normalized by the sum rule
//! `J_0 + 2 (J_2 + J_4 + ...) = 1`, which is stable for every order at
//! once. Upward recurrence would blow up for n > x.

/// J_0(x) .. J_{n_max}(x) in one pass.
pub fn bessel_j_sequence(n_max: usize, x: f64) -> Vec<f64> {
    assert!(
        x.is_finite() && x >= 0.0,
        "argument must be finite and >= 0"
    );
    if x == 0.0 {
        let mut out = vec![0.0; n_max + 1];
        out[0] = 1.0;
        return out;
    }

    // Start the downward recurrence far enough above both n_max and the
    // turning point n ~ x that the seed order is deep in the decaying tail.
    let top = (n_max as f64).max(x);
    let mut start = (top + 10.0 * top.cbrt() + 30.0).ceil() as usize;
    if start % 2 == 1 {
        start += 1;
    }

    let mut out = vec![0.0; n_max + 1];
    let mut j_up: f64 = 0.0; // J_{k+1}
    let mut j: f64 = 1e-300; // J_k seed, arbitrary scale
    let mut norm = 0.0; // accumulates J_0 + 2 sum_{even} J_k at current scale
    for k in (0..=start).rev() {
        if k <= n_max {
            out[k] = j;
        }
        if k % 2 == 0 {
            norm += if k == 0 { j } else { 2.0 * j };
        }
        if k > 0 {
            let j_dn = (2.0 * k as f64 / x) * j - j_up;
            j_up = j;
            j = j_dn;
            // Rescale if the recurrence grows toward overflow.
            if j.abs() > 1e250 {
                let s = 1e-250;
                j *= s;
                j_up *= s;
                norm *= s;
                for v in out.iter_mut() {
                    *v *= s;
                }
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Single J_n(x).
pub fn bessel_j(n: usize, x: f64) -> f64 {
    bessel_j_sequence(n, x)[n]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: J_n(x) = (1/pi) * int_0^pi cos(n t - x sin t) dt,
    /// composite Simpson with enough points to resolve the oscillations.
    fn bessel_j_quadrature(n: usize, x: f64) -> f64 {
        let panels = 64 * (n + x as usize + 8).next_power_of_two();
        let h = std::f64::consts::PI / panels as f64;
        let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
        let mut sum = f(0.0) + f(std::f64::consts::PI);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(i as f64 * h);
        }
        sum * h / 3.0 / std::f64::consts::PI
    }

    #[test]
    fn matches_classic_values() {
        // Abramowitz & Stegun reference points.
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((bessel_j(0, 20.0) - 0.167_024_664_340_583_15).abs() < 1e-13);
        assert!((bessel_j(10, 10.0) - 0.207_486_106_633_358_85).abs() < 1e-13);
    }

    #[test]
    fn matches_quadrature_at_shelf_scale_arguments() {
        for &x in &[20.0f64, 173.0, 500.0] {
            let n_max = (x + 10.0 * x.cbrt()) as usize;
            let seq = bessel_j_sequence(n_max, x);
            for &n in &[0usize, 1, 5, n_max / 2, n_max - 1] {
                let oracle = bessel_j_quadrature(n, x);
                assert!(
                    (seq[n] - oracle).abs() < 1e-10,
                    "J_{n}({x}): got {}, quadrature {}",
                    seq[n],
                    oracle
                );
            }
        }
    }

    #[test]
    fn sum_rule_holds() {
        for &x in &[0.5f64, 20.0, 173.0, 500.0] {
            let n_max = (x + 10.0 * x.cbrt()) as usize + 40;
            let seq = bessel_j_sequence(n_max, x);
            let total: f64 = seq[0] * seq[0] + 2.0 * seq[1..].iter().map(|j| j * j).sum::<f64>();
            assert!((total - 1.0).abs() < 1e-10, "sum rule at x = {x}: {total}");
        }
    }

    #[test]
    fn zero_argument() {
        let seq = bessel_j_sequence(8, 0.0);
        assert_eq!(seq[0], 1.0);
        assert!(seq[1..].iter().all(|&j| j == 0.0));
    }

    #[test]
    fn tail_orders_decay() {
        let seq = bessel_j_sequence(240, 173.0);
        // Beyond the turning-point lobe the orders decay superexponentially.
        assert!(seq[239].abs() < 1e-12);
        assert!(seq[239].abs() < seq[173].abs());
    }
}

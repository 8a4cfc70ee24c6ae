//! Scalar kernels of the scaling flow and its companion functions.
//!
//! The sections are written in terms of `u = ln((1-s)/s)` and the positive
//! function `e(z) = expm1(z)/z`, which removes the 0/0 at `s = 1/2` and keeps
//! large exponents in log space:
//!
//! * `f_r(s, 1-s) = (s/r) e(u) / e(r u)`
//! * `g_r(s, 1-s) = (1-s) e((r-1) u) / e(r u)`
//!
//! The two-variable versions (`flow_joint`, `g_joint`) evaluate the closed
//! forms literally and switch to a second-order series within `1e-7` of the
//! diagonal.

const SERIES_SWITCH: f64 = 1e-5;

/// Ratio eigenvalues this close to 0 or 1 are treated as exactly 0 or 1.
pub const BOUNDARY_SNAP: f64 = 1e-12;

/// Clamp into `[0, 1]` and snap roundoff-sized distances to the endpoints;
/// sections such as `f_r`, `r < 1`, have infinite slope there.
pub fn snap_unit(s: f64) -> f64 {
    if s <= BOUNDARY_SNAP {
        0.0
    } else if s >= 1.0 - BOUNDARY_SNAP {
        1.0
    } else {
        s
    }
}
const DIAGONAL_SWITCH: f64 = 1e-7;

/// `ln(expm1(z)/z)`; the argument of the log is positive for every real `z`.
pub fn ln_rel_expm1(z: f64) -> f64 {
    if z.abs() < SERIES_SWITCH {
        (z / 2.0 + z * z / 6.0 + z * z * z / 24.0).ln_1p()
    } else if z > 0.0 {
        z + (-(-z).exp()).ln_1p() - z.ln()
    } else {
        (-z.exp_m1()).ln() - (-z).ln()
    }
}

/// `ln |expm1(z)|` without overflow for large positive `z`.
pub fn ln_abs_expm1(z: f64) -> f64 {
    if z > 0.0 {
        z + (-(-z).exp()).ln_1p()
    } else {
        (-z.exp_m1()).ln()
    }
}

/// `ln((1-s)/s)` for `s` in the open unit interval.
pub fn log_odds(s: f64) -> f64 {
    ((1.0 - 2.0 * s) / s).ln_1p()
}

/// Section `f_r(s, 1-s) = s^r (2s-1) / (s^r - (1-s)^r)`, with value `1/(2r)`
/// at `s = 1/2`.
pub fn flow_section(r: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let u = log_odds(s);
    s / r * (ln_rel_expm1(u) - ln_rel_expm1(r * u)).exp()
}

/// `f_r(s,t) = s^r (s-t) / (s^r - t^r)`, `t/r` on the diagonal.
pub fn flow_joint(r: f64, s: f64, t: f64) -> f64 {
    let scale = s.max(t);
    if scale == 0.0 {
        return 0.0;
    }
    if (s - t).abs() <= DIAGONAL_SWITCH * scale {
        let u = (t / s).ln();
        return s / r * (1.0 + (1.0 - r) * u / 2.0 + (1.0 / 6.0 - r / 4.0 + r * r / 12.0) * u * u);
    }
    let sr = s.powf(r);
    sr * (s - t) / (sr - t.powf(r))
}

/// Section `g_r(s, 1-s)` of `g_r(s,t) = r/(1-r) (s t^r - s^r t)/(s^r - t^r)`.
pub fn g_section(r: f64, s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let u = log_odds(s);
    (1.0 - s) * (ln_rel_expm1((r - 1.0) * u) - ln_rel_expm1(r * u)).exp()
}

/// `g_r(s,t)`; `g_1(s,t) = st (ln s - ln t)/(s - t)` and `g_r(t,t) = t`.
pub fn g_joint(r: f64, s: f64, t: f64) -> f64 {
    let scale = s.max(t);
    if s <= 0.0 || t <= 0.0 {
        return 0.0;
    }
    if (s - t).abs() <= DIAGONAL_SWITCH * scale {
        let u = (t / s).ln();
        let a = r - 1.0;
        let num = 1.0 + a * u / 2.0 + a * a * u * u / 6.0;
        let den = 1.0 + r * u / 2.0 + r * r * u * u / 6.0;
        return t * num / den;
    }
    if (r - 1.0).abs() < 1e-9 {
        return s * t * (s.ln() - t.ln()) / (s - t);
    }
    let (sr, tr) = (s.powf(r), t.powf(r));
    r / (1.0 - r) * (s * tr - sr * t) / (sr - tr)
}

/// `s^r / (s^r + (1-s)^r)`: the rescaled ratio-operator eigenvalue.
pub fn ratio_power(r: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    1.0 / (1.0 + (r * log_odds(s)).exp())
}

/// `f_r(s, 1-s) - (2s-1)_+`, without cancellation for large `r`.
pub fn freeze_gap(r: f64, s: f64) -> f64 {
    if s <= 0.5 {
        return flow_section(r, s);
    }
    if s >= 1.0 {
        return 0.0;
    }
    let v = -r * log_odds(s);
    if v < 1e-3 {
        flow_section(r, s) - (2.0 * s - 1.0)
    } else {
        (2.0 * s - 1.0) / v.exp_m1()
    }
}

/// `h(x) = (1-x)(1+x^r) / ((1+x)(1-x^r))`, `x = (1-s)/s`: eigenvalue of the
/// real part of `S^(r)` relative to that of `S`.
pub fn real_part_factor(r: f64, s: f64) -> f64 {
    flow_section(r, s) + flow_section(r, 1.0 - s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_section(r: f64, s: f64) -> f64 {
        s.powf(r) * (2.0 * s - 1.0) / (s.powf(r) - (1.0 - s).powf(r))
    }

    #[test]
    fn flow_section_matches_naive_away_from_center() {
        for &r in &[0.3, 1.0, 2.0, 5.0] {
            for k in 1..20 {
                let s = k as f64 / 20.0;
                if (s - 0.5).abs() < 1e-9 {
                    continue;
                }
                let (a, b) = (flow_section(r, s), naive_section(r, s));
                assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0), "r={r} s={s} {a} {b}");
            }
        }
    }

    #[test]
    fn flow_section_center_and_endpoints() {
        for &r in &[0.1, 0.5, 1.0, 2.0, 7.0] {
            assert!((flow_section(r, 0.5) - 1.0 / (2.0 * r)).abs() < 1e-15);
            // slope one at the center, independent of r
            let eps = 1e-6;
            let slope = (flow_section(r, 0.5 + eps) - flow_section(r, 0.5 - eps)) / (2.0 * eps);
            assert!((slope - 1.0).abs() < 1e-6, "r={r} slope={slope}");
        }
        assert_eq!(flow_section(3.0, 0.0), 0.0);
        assert_eq!(flow_section(3.0, 1.0), 1.0);
    }

    #[test]
    fn flow_section_r2_is_square() {
        for k in 0..=40 {
            let s = k as f64 / 40.0;
            assert!((flow_section(2.0, s) - s * s).abs() < 1e-15);
        }
    }

    #[test]
    fn flow_section_large_r_no_overflow() {
        let v = flow_section(5000.0, 0.8);
        assert!((v - 0.6).abs() < 1e-15);
        assert!(flow_section(5000.0, 0.2) < 1e-300);
        assert!(flow_section(5000.0, 0.2) >= 0.0);
    }

    #[test]
    fn g_section_values() {
        // g_r(t,t) = t
        for &r in &[0.5, 1.0, 1.9, 3.0] {
            assert!((g_section(r, 0.5) - 0.5).abs() < 1e-15);
        }
        // r = 2: g_2(s,t) = 2st/(s+t)
        for k in 1..10 {
            let s = k as f64 / 10.0;
            assert!((g_section(2.0, s) - 2.0 * s * (1.0 - s)).abs() < 1e-14);
        }
        // r = 1/2: g = sqrt(st)
        for k in 1..10 {
            let s = k as f64 / 10.0;
            assert!((g_section(0.5, s) - (s * (1.0 - s)).sqrt()).abs() < 1e-14);
        }
        let s = 0.3_f64;
        let g1 = s * (1.0 - s) * (s.ln() - (1.0 - s).ln()) / (2.0 * s - 1.0);
        assert!((g_section(1.0, s) - g1).abs() < 1e-15);
    }

    #[test]
    fn joints_agree_with_sections() {
        for &r in &[0.5, 1.0, 2.0, 3.0] {
            for i in 0..=8 {
                for j in 0..=8 {
                    let (s, t) = (i as f64 / 4.0, j as f64 / 4.0);
                    let sum = s + t;
                    let (fj, gj) = (flow_joint(r, s, t), g_joint(r, s, t));
                    let (fs, gs) = if sum > 0.0 {
                        (sum * flow_section(r, s / sum), sum * g_section(r, s / sum))
                    } else {
                        (0.0, 0.0)
                    };
                    assert!((fj - fs).abs() <= 1e-12 * fs.abs().max(1e-300), "f r={r} ({s},{t}) {fj} {fs}");
                    assert!((gj - gs).abs() <= 1e-12 * gs.abs().max(1e-300), "g r={r} ({s},{t}) {gj} {gs}");
                }
            }
        }
    }

    #[test]
    fn ratio_power_example() {
        assert!((ratio_power(2.0, 0.8) - 16.0 / 17.0).abs() < 1e-15);
        assert!((ratio_power(2.0, 0.2) - 1.0 / 17.0).abs() < 1e-15);
        assert_eq!(ratio_power(7.0, 0.5), 0.5);
    }

    #[test]
    fn freeze_gap_matches_difference() {
        for &r in &[0.5, 2.0, 30.0] {
            for k in 1..40 {
                let s = k as f64 / 40.0;
                let direct = flow_section(r, s) - (2.0 * s - 1.0).max(0.0);
                assert!((freeze_gap(r, s) - direct).abs() < 1e-14, "r={r} s={s}");
            }
        }
        // continuous across the switch and positive deep in the tail
        let s = 0.5 + 1e-3 / (4.0 * 1024.0);
        let v = -1024.0 * log_odds(s);
        assert!((v - 1e-3).abs() < 1e-6);
        assert!(freeze_gap(1024.0, 0.6) > 0.0 && freeze_gap(1024.0, 0.6) < 1e-170);
        let x: f64 = 0.2 / 0.8;
        assert!((freeze_gap(8.0, 0.8) / (0.6 * x.powi(8) / (1.0 - x.powi(8))) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn real_part_factor_matches_h() {
        let h = |r: f64, x: f64| (1.0 - x) * (1.0 + x.powf(r)) / ((1.0 + x) * (1.0 - x.powf(r)));
        for &r in &[0.5, 2.0, 3.0] {
            for &s in &[0.1, 0.3, 0.8, 0.95] {
                let x = (1.0 - s) / s;
                assert!((real_part_factor(r, s) - h(r, x)).abs() < 1e-13);
            }
            assert!((real_part_factor(r, 0.5) - 1.0 / r).abs() < 1e-15);
        }
    }
}

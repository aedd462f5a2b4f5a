//! Dormand-Prince 5(4) coefficients with the 4th-order continuous extension.

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

#[rustfmt::skip]
pub(crate) const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// 5th-order weights (the propagated solution); equal to the last row of `A`.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// `b − b̂`: difference between the 5th- and embedded 4th-order weights.
pub(crate) const E: [f64; 7] = [
    -71.0 / 57600.0,
    0.0,
    71.0 / 16695.0,
    -71.0 / 1920.0,
    17253.0 / 339200.0,
    -22.0 / 525.0,
    1.0 / 40.0,
];

/// Dense output: `y(t₀ + θh) = y₀ + h Σ_k (Σ_i K_i P[i][k]) θ^(k+1)`.
#[rustfmt::skip]
pub(crate) const P: [[f64; 4]; 7] = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_sums_match_nodes() {
        for (i, row) in A.iter().enumerate() {
            let s: f64 = row.iter().sum();
            assert!((s - C[i]).abs() < 1e-14, "row {i}");
        }
        let sb: f64 = B.iter().sum();
        assert!((sb - 1.0).abs() < 1e-15);
        let se: f64 = E.iter().sum();
        assert!(se.abs() < 1e-15);
    }

    #[test]
    fn dense_output_reaches_step_end() {
        for i in 0..7 {
            let s: f64 = P[i].iter().sum();
            assert!((s - B[i]).abs() < 1e-14, "stage {i}: {s} vs {}", B[i]);
        }
    }

    /// Classical order conditions up to order 5 for the propagated weights.
    #[test]
    fn order_conditions() {
        let dot = |u: &[f64], w: &[f64]| u.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        let c = C;
        let b = B;
        let ac: Vec<f64> = (0..7).map(|i| dot(&A[i][..6], &c[..6])).collect();
        assert!((dot(&b, &c) - 0.5).abs() < 1e-14);
        let c2: Vec<f64> = c.iter().map(|x| x * x).collect();
        assert!((dot(&b, &c2) - 1.0 / 3.0).abs() < 1e-14);
        assert!((dot(&b, &ac) - 1.0 / 6.0).abs() < 1e-14);
        let c3: Vec<f64> = c.iter().map(|x| x * x * x).collect();
        assert!((dot(&b, &c3) - 0.25).abs() < 1e-14);
        let c4: Vec<f64> = c.iter().map(|x| x.powi(4)).collect();
        assert!((dot(&b, &c4) - 0.2).abs() < 1e-14);
    }
}

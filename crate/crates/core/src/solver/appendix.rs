use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AppendixMode {
    /// `sum_{i<=k} i rho^i < n^2`.
    LinearGeo,
    /// `sum_{i<=k} i rho^{i/2} ln i < 16 n^3`.
    LogHalfGeo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixSum {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Partial sums with `rho = 1 - 1/n`, compared with their closed-form
/// bounds. Requires `n >= 2`, `k >= 1`; other inputs give `holds = false`.
pub fn verify_appendix_sums(n: usize, k: usize, mode: AppendixMode) -> AppendixSum {
    if n < 2 || k < 1 {
        return AppendixSum {
            lhs: f64::NAN,
            rhs: f64::NAN,
            holds: false,
        };
    }
    let nf = n as f64;
    let rho = 1.0 - 1.0 / nf;
    let (lhs, rhs) = match mode {
        AppendixMode::LinearGeo => {
            let mut p = 1.0;
            let mut s = 0.0;
            for i in 1..=k {
                p *= rho;
                s += i as f64 * p;
            }
            (s, nf * nf)
        }
        AppendixMode::LogHalfGeo => {
            let r = rho.sqrt();
            let mut p = 1.0;
            let mut s = 0.0;
            for i in 1..=k {
                p *= r;
                let fi = i as f64;
                s += fi * p * fi.ln();
            }
            (s, 16.0 * nf * nf * nf)
        }
    };
    AppendixSum {
        lhs,
        rhs,
        holds: lhs < rhs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecurrenceCheck {
    pub simulated: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Runs `u_j = rho (u_{j-1} + C / sqrt(j))` for `j = 2..=k` from `u_1` and
/// compares `u_k` with `rho^k u_1 + 2 C rho / (sqrt(k) (1 - rho))`.
pub fn recurrence_check(rho: f64, c: f64, u1: f64, k: usize) -> RecurrenceCheck {
    let mut u = u1;
    for j in 2..=k {
        u = rho * (u + c / (j as f64).sqrt());
    }
    let kf = k.max(1) as f64;
    let bound = rho.powf(kf) * u1 + 2.0 * c * rho / (kf.sqrt() * (1.0 - rho));
    RecurrenceCheck {
        simulated: u,
        bound,
        holds: u <= bound,
    }
}

use crate::error::{Error, Result};
use crate::path::SampledPath;

/// `sup_{s≠t} |ω(t) - ω(s)| / (|t-s|^γ (1 + |t| + |s|)^δ)` over all grid pairs.
pub fn weighted_norm(omega: &SampledPath, gamma: f64, delta: f64) -> f64 {
    let n = omega.len();
    let d = omega.dim();
    let dt = omega.dt();
    let t0 = omega.t0();
    let one_sided = t0 >= 0.0 || omega.end_time() <= 1e-12 * dt;
    let lag: Vec<f64> = (0..n).map(|m| (m as f64 * dt).powf(-gamma)).collect();
    let weight: Vec<f64> = if one_sided {
        (0..2 * n).map(|s| (1.0 + (2.0 * t0 + s as f64 * dt).abs()).powf(-delta)).collect()
    } else {
        Vec::new()
    };
    let data = omega.data();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let mut sq = 0.0;
            for c in 0..d {
                let v = data[j * d + c] - data[i * d + c];
                sq += v * v;
            }
            if sq == 0.0 {
                continue;
            }
            let w = if one_sided {
                weight[i + j]
            } else {
                (1.0 + omega.time(i).abs() + omega.time(j).abs()).powf(-delta)
            };
            best = best.max(sq.sqrt() * lag[j - i] * w);
        }
    }
    best
}

/// The shifted past `θ_t ω`: `s ↦ B(t + s) - B(t)` for `s ≤ 0`, where `B`
/// concatenates the past `omega` on `[-T_past, 0]` with the realized future
/// `future` on `[0, t]`. The window length is kept, dropping the oldest part.
pub fn shift_past(omega: &SampledPath, future: &SampledPath) -> Result<SampledPath> {
    if omega.dim() != future.dim() || (omega.dt() - future.dt()).abs() > 1e-12 * omega.dt() {
        return Err(Error::Dimension("past and future must share dimension and step".into()));
    }
    if future.t0().abs() > 1e-12 {
        return Err(Error::Dimension("realized future must start at t = 0".into()));
    }
    let d = omega.dim();
    let np = omega.n_steps();
    let nf = future.n_steps();
    let end = future.last().to_vec();
    let mut data = Vec::with_capacity((np + 1) * d);
    // combined index q over [-T_past, t]: q < np from the past, q >= np from the future
    for q in nf..=np + nf {
        let v = if q < np {
            omega.value(q)
        } else {
            future.value(q - np)
        };
        for c in 0..d {
            data.push(v[c] - end[c]);
        }
    }
    SampledPath::new(omega.t0(), omega.dt(), d, data)
}

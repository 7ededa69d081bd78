//! Per-frame counting loops for the precision and success curves.

fn center(b: [f64; 4]) -> (f64, f64) {
    (b[0] + b[2] / 2.0, b[1] + b[3] / 2.0)
}

pub fn center_distance(a: [f64; 4], b: [f64; 4]) -> f64 {
    let (ax, ay) = center(a);
    let (bx, by) = center(b);
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

pub fn overlap(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = ((a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0])).max(0.0);
    let ih = ((a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Fraction of frames with center distance `<= t` for `t = 0..=50`.
pub fn precision(out: &[[f64; 4]], gt: &[[f64; 4]]) -> Vec<f64> {
    (0..=50)
        .map(|t| {
            let mut hits = 0usize;
            for i in 0..gt.len() {
                if center_distance(out[i], gt[i]) <= t as f64 {
                    hits += 1;
                }
            }
            hits as f64 / gt.len() as f64
        })
        .collect()
}

/// Fraction of frames with overlap `> k/20` for `k = 0..=20`.
pub fn success(out: &[[f64; 4]], gt: &[[f64; 4]]) -> Vec<f64> {
    (0..=20)
        .map(|k| {
            let theta = k as f64 / 20.0;
            let mut hits = 0usize;
            for i in 0..gt.len() {
                if overlap(out[i], gt[i]) > theta {
                    hits += 1;
                }
            }
            hits as f64 / gt.len() as f64
        })
        .collect()
}

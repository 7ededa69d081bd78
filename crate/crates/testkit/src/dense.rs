//! Constant-velocity Kalman filter on `Vec<Vec<f64>>` with Gauss-Jordan inversion.

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    let mut out = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

pub fn scale(a: &Mat, s: f64) -> Mat {
    a.iter().map(|r| r.iter().map(|v| v * s).collect()).collect()
}

/// Gauss-Jordan with partial pivoting.
pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn symmetrize(p: &mut Mat) {
    let n = p.len();
    for r in 0..n {
        for c in r + 1..n {
            let v = 0.5 * (p[r][c] + p[c][r]);
            p[r][c] = v;
            p[c][r] = v;
        }
    }
}

/// Jacobi eigenvalue sweep for small symmetric matrices.
pub fn symmetric_eigenvalues(a: &Mat) -> Vec<f64> {
    let n = a.len();
    let mut m = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let mut rot = eye(n);
                rot[p][p] = c;
                rot[q][q] = c;
                rot[p][q] = s;
                rot[q][p] = -s;
                m = mul(&mul(&transpose(&rot), &m), &rot);
            }
        }
    }
    (0..n).map(|i| m[i][i]).collect()
}

/// State `[x, y, w, h, vx, vy, vw, vh]` and its covariance.
#[derive(Debug, Clone)]
pub struct DenseKalman {
    pub s: Vec<f64>,
    pub p: Mat,
}

impl DenseKalman {
    pub fn new(b0: [f64; 4], p0: f64) -> Self {
        let mut s = b0.to_vec();
        s.extend([0.0; 4]);
        Self {
            s,
            p: scale(&eye(8), p0),
        }
    }

    pub fn transition(dt: f64) -> Mat {
        let mut f = eye(8);
        for r in 0..4 {
            f[r][r + 4] = dt;
        }
        f
    }

    fn observation() -> Mat {
        let mut h = zeros(4, 8);
        for r in 0..4 {
            h[r][r] = 1.0;
        }
        h
    }

    pub fn predict(&mut self, dt: f64) {
        let f = Self::transition(dt);
        let col: Mat = self.s.iter().map(|v| vec![*v]).collect();
        self.s = mul(&f, &col).into_iter().map(|r| r[0]).collect();
        self.p = add(&mul(&mul(&f, &self.p), &transpose(&f)), &scale(&eye(8), dt * dt));
        symmetrize(&mut self.p);
    }

    pub fn update(&mut self, z: [f64; 4], r: f64) {
        let h = Self::observation();
        let ht = transpose(&h);
        let innovation = add(&mul(&mul(&h, &self.p), &ht), &scale(&eye(4), r));
        let k = mul(&mul(&self.p, &ht), &inverse(&innovation));
        let residual: Mat = (0..4).map(|i| vec![z[i] - self.s[i]]).collect();
        let ds = mul(&k, &residual);
        for i in 0..8 {
            self.s[i] += ds[i][0];
        }
        self.p = mul(&sub(&eye(8), &mul(&k, &h)), &self.p);
        symmetrize(&mut self.p);
    }

    /// Position after `dt` frames without touching the state; sizes floored at `min_size`.
    pub fn extrapolate(&self, dt: f64, min_size: f64) -> [f64; 4] {
        [
            self.s[0] + dt * self.s[4],
            self.s[1] + dt * self.s[5],
            (self.s[2] + dt * self.s[6]).max(min_size),
            (self.s[3] + dt * self.s[7]).max(min_size),
        ]
    }
}

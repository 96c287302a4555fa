//! Independent reference computations used to check the optimized
//! implementations. Deliberately naive: explicit enumeration, no dynamic
//! programming, no shared helpers with the library.

#![allow(dead_code)]

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Best score over every monotone path from (0, 0) to (m.len(), q.len())
/// where a diagonal step into cell (i, j) earns `m[i-1] . q[j-1]` and a
/// horizontal or vertical step costs `indel`.
pub fn nw_by_paths(m: &[Vec<f64>], q: &[Vec<f64>], indel: f64) -> f64 {
    fn walk(i: usize, j: usize, score: f64, m: &[Vec<f64>], q: &[Vec<f64>], indel: f64, best: &mut f64) {
        if i == m.len() && j == q.len() {
            *best = best.max(score);
            return;
        }
        if i < m.len() {
            walk(i + 1, j, score - indel, m, q, indel, best);
        }
        if j < q.len() {
            walk(i, j + 1, score - indel, m, q, indel, best);
        }
        if i < m.len() && j < q.len() {
            walk(i + 1, j + 1, score + dot(&m[i], &q[j]), m, q, indel, best);
        }
    }
    let mut best = f64::NEG_INFINITY;
    walk(0, 0, 0.0, m, q, indel, &mut best);
    best
}

/// Best score over every monotone path starting at any grid point and
/// ending at any later grid point (the empty path scores 0).
pub fn sw_by_paths(m: &[Vec<f64>], q: &[Vec<f64>], indel: f64) -> f64 {
    fn walk(i: usize, j: usize, score: f64, m: &[Vec<f64>], q: &[Vec<f64>], indel: f64, best: &mut f64) {
        *best = best.max(score);
        if i < m.len() {
            walk(i + 1, j, score - indel, m, q, indel, best);
        }
        if j < q.len() {
            walk(i, j + 1, score - indel, m, q, indel, best);
        }
        if i < m.len() && j < q.len() {
            walk(i + 1, j + 1, score + dot(&m[i], &q[j]), m, q, indel, best);
        }
    }
    let mut best = 0.0f64;
    for i in 0..=m.len() {
        for j in 0..=q.len() {
            walk(i, j, 0.0, m, q, indel, &mut best);
        }
    }
    best
}

pub fn centroid_two_pass(m: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
    let dim = m[0].len();
    let mut cm = vec![0.0; dim];
    for row in m {
        for d in 0..dim {
            cm[d] += row[d];
        }
    }
    let mut cq = vec![0.0; dim];
    for row in q {
        for d in 0..dim {
            cq[d] += row[d];
        }
    }
    for d in 0..dim {
        cm[d] /= m.len() as f64;
        cq[d] /= q.len() as f64;
    }
    sq(&cm, &cq)
}

pub fn linkage(m: &[Vec<f64>], q: &[Vec<f64>]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for a in m {
        for b in q {
            let d = sq(a, b);
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    (lo, hi)
}

/// Minimum over every offset of the shorter sequence along the longer one.
pub fn best_trace_by_offsets(m: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    if m.len() <= q.len() {
        for k in 0..=q.len() - m.len() {
            best = best.min((0..m.len()).map(|i| sq(&m[i], &q[i + k])).sum());
        }
    } else {
        for k in 0..=m.len() - q.len() {
            best = best.min((0..q.len()).map(|i| sq(&m[i + k], &q[i])).sum());
        }
    }
    best
}

/// Deterministic stream of pseudo-random unit vectors (SplitMix64 plus
/// Box-Muller), independent of the library's RNG choices.
pub struct UnitVectors {
    state: u64,
}

impl UnitVectors {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn unit(&mut self, dim: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..dim).map(|_| self.gaussian()).collect();
        let n = dot(&v, &v).sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    pub fn sequence(&mut self, len: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..len).map(|_| self.unit(dim)).collect()
    }

    /// Integer in `lo..=hi`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }
}

//! Exact Euclidean distance transform with anisotropic spacing.
//!
//! Separable lower-envelope-of-parabolas algorithm (Felzenszwalb &
//! Huttenlocher), one pass per axis over squared distances.

use crate::scalar::Real;

/// Squared distance (mm²) from every voxel to the nearest feature voxel.
///
/// Voxels are laid out with axis 0 fastest. When there are no features
/// every entry is `+inf`.
pub fn squared_distance_to_features<F: Real>(features: &[bool], dims: [usize; 3], spacing: [F; 3]) -> Vec<F> {
    let n: usize = dims.iter().product();
    assert_eq!(features.len(), n, "feature buffer does not match dims");
    let inf = F::infinity();
    let mut dist: Vec<F> = features.iter().map(|&f| if f { F::zero() } else { inf }).collect();
    let strides = [1, dims[0], dims[0] * dims[1]];
    let longest = *dims.iter().max().unwrap_or(&1);
    let mut line = vec![F::zero(); longest];
    let mut out = vec![F::zero(); longest];
    let mut scratch = Envelope::with_capacity(longest);
    for axis in 0..3 {
        let len = dims[axis];
        if len == 1 {
            continue;
        }
        let stride = strides[axis];
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for j in 0..dims[b] {
            for i in 0..dims[a] {
                let start = i * strides[a] + j * strides[b];
                for k in 0..len {
                    line[k] = dist[start + k * stride];
                }
                envelope_1d(&line[..len], spacing[axis], &mut out[..len], &mut scratch);
                for k in 0..len {
                    dist[start + k * stride] = out[k];
                }
            }
        }
    }
    dist
}

struct Envelope<F> {
    vertices: Vec<usize>,
    bounds: Vec<F>,
}

impl<F: Real> Envelope<F> {
    fn with_capacity(n: usize) -> Self {
        Envelope {
            vertices: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }
}

// out[q] = min_p (h·(q−p))² + f[p]
fn envelope_1d<F: Real>(f: &[F], h: F, out: &mut [F], env: &mut Envelope<F>) {
    let inf = F::infinity();
    env.vertices.clear();
    env.bounds.clear();
    let pos = |i: usize| h * F::from_usize_lossy(i);
    // Abscissa where the parabolas rooted at p and q intersect.
    let meet = |p: usize, q: usize| {
        let (xp, xq) = (pos(p), pos(q));
        ((f[q] + xq * xq) - (f[p] + xp * xp)) / ((xq - xp) + (xq - xp))
    };
    for q in 0..f.len() {
        if f[q] == inf {
            continue;
        }
        loop {
            match env.vertices.last() {
                None => {
                    env.vertices.push(q);
                    env.bounds.push(-inf);
                    break;
                }
                Some(&p) => {
                    let s = meet(p, q);
                    if s <= *env.bounds.last().unwrap() {
                        env.vertices.pop();
                        env.bounds.pop();
                    } else {
                        env.vertices.push(q);
                        env.bounds.push(s);
                        break;
                    }
                }
            }
        }
    }
    if env.vertices.is_empty() {
        out.fill(inf);
        return;
    }
    env.bounds.push(inf);
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        let x = pos(q);
        while env.bounds[k + 1] < x {
            k += 1;
        }
        let p = env.vertices[k];
        let d = x - pos(p);
        *slot = d * d + f[p];
    }
}

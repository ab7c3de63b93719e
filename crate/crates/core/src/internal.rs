//! Perfect hashing of one small key set through a random acyclic bipartite graph.
//!
//! Each key is an edge between left vertex `f0(x)` and right vertex
//! `tau + f1(x)`. Once a seed yields an acyclic graph, every vertex gets a bit
//! `T1[v] = 1` iff its distance to the root of its tree is 1 or 2 mod 4. The
//! XOR of the two endpoint bits then picks the endpoint farther from the root,
//! which is unique per edge, so `phi` is injective. `T2` marks the image of
//! `phi` and ranking inside it makes the function minimal. `T1` is nonzero
//! only on positions marked in `T2`, so it is stored compressed as one bit per
//! key, addressed through the same rank.

use rand::Rng;

use crate::bits::BitVector;
use crate::bucket_hash::{find_seed, BucketSeed};
use crate::error::Result;
use crate::gf2_hash::Fingerprint128;
use crate::rank::RankedBitVector;

/// Whether functions are minimal (range `n`) or plain perfect (range `2 tau`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Mphf,
    Phf,
}

/// Graph sparsity `epsilon`, stored in millionths so that `tau` is computed
/// with exact integer arithmetic everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Epsilon(u32);

impl Epsilon {
    pub const DEFAULT: Epsilon = Epsilon(45_000);

    pub fn from_f64(eps: f64) -> Option<Self> {
        let ppm = (eps * 1e6).round();
        (eps.is_finite() && ppm >= 1.0 && ppm <= u32::MAX as f64).then_some(Epsilon(ppm as u32))
    }

    pub fn from_ppm(ppm: u32) -> Option<Self> {
        (ppm >= 1).then_some(Epsilon(ppm))
    }

    pub fn ppm(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    /// `ceil((1 + eps) * n)`, and 0 for an empty set.
    pub fn tau(self, n: usize) -> usize {
        let scaled = n as u128 * (1_000_000 + self.0 as u128);
        scaled.div_ceil(1_000_000) as usize
    }
}

impl Default for Epsilon {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    tau: usize,
    /// `(left, right)` with `left < tau <= right < 2 tau`.
    edges: Vec<(u32, u32)>,
}

impl BipartiteGraph {
    /// One edge per hash pair, in input order; the right endpoint is shifted by `tau`.
    pub fn new(pairs: &[(u32, u32)], tau: usize) -> Self {
        let edges = pairs
            .iter()
            .map(|&(l, r)| {
                debug_assert!((l as usize) < tau && (r as usize) < tau);
                (l, (tau + r as usize) as u32)
            })
            .collect();
        BipartiteGraph { tau, edges }
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn is_acyclic(&self) -> bool {
        self.label_t1().is_some()
    }

    /// Depth-parity labels for all `2 tau` vertices, or `None` if the graph has
    /// a cycle (a repeated edge counts as one). Each tree is rooted at its
    /// lowest-numbered left vertex.
    pub fn label_t1(&self) -> Option<BitVector> {
        let vertices = 2 * self.tau;
        // Compressed adjacency: (neighbour, edge id) per incidence.
        let mut start = vec![0u32; vertices + 1];
        for &(l, r) in &self.edges {
            start[l as usize + 1] += 1;
            start[r as usize + 1] += 1;
        }
        for v in 0..vertices {
            start[v + 1] += start[v];
        }
        let mut fill = start.clone();
        let mut adj = vec![(0u32, 0u32); 2 * self.edges.len()];
        for (e, &(l, r)) in self.edges.iter().enumerate() {
            adj[fill[l as usize] as usize] = (r, e as u32);
            fill[l as usize] += 1;
            adj[fill[r as usize] as usize] = (l, e as u32);
            fill[r as usize] += 1;
        }

        let mut t1 = BitVector::new(vertices);
        let mut visited = BitVector::new(vertices);
        let mut stack: Vec<(u32, u32, u32)> = Vec::new();
        for root in 0..self.tau {
            if visited.get(root) || start[root] == start[root + 1] {
                continue;
            }
            visited.set(root, true);
            stack.push((root as u32, u32::MAX, 0));
            while let Some((v, via, depth)) = stack.pop() {
                if matches!(depth % 4, 1 | 2) {
                    t1.set(v as usize, true);
                }
                let v = v as usize;
                for &(w, e) in &adj[start[v] as usize..start[v + 1] as usize] {
                    if e == via {
                        continue;
                    }
                    if visited.get(w as usize) {
                        return None;
                    }
                    visited.set(w as usize, true);
                    stack.push((w, e, depth + 1));
                }
            }
        }
        Some(t1)
    }
}

/// The endpoint of `pair` farther from its tree root: the left vertex when
/// the endpoint labels agree, otherwise `tau + right`.
#[inline]
pub fn phi(t1: impl Fn(usize) -> bool, pair: (u32, u32), tau: usize) -> usize {
    let left = pair.0 as usize;
    let right = tau + pair.1 as usize;
    if t1(left) ^ t1(right) {
        right
    } else {
        left
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BucketLayout {
    /// `T2` with rank samples plus the compressed labels `T1'` (one bit per key).
    Minimal { t2: RankedBitVector, t1c: BitVector },
    /// Uncompressed labels; evaluation returns `phi` directly.
    Plain { t1: BitVector },
}

/// The function of one bucket (or of a whole in-memory key set).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketFunction {
    pub(crate) seed: u32,
    pub(crate) tau: usize,
    pub(crate) n: usize,
    pub(crate) layout: BucketLayout,
}

impl BucketFunction {
    pub fn empty(mode: Mode, kappa: u32) -> Self {
        let layout = match mode {
            Mode::Mphf => BucketLayout::Minimal {
                t2: RankedBitVector::new(BitVector::new(0), kappa),
                t1c: BitVector::new(0),
            },
            Mode::Phf => BucketLayout::Plain { t1: BitVector::new(0) },
        };
        BucketFunction {
            seed: 0,
            tau: 0,
            n: 0,
            layout,
        }
    }

    pub fn seed(&self) -> u32 {
        self.seed
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn layout(&self) -> &BucketLayout {
        &self.layout
    }

    pub fn mode(&self) -> Mode {
        match self.layout {
            BucketLayout::Minimal { .. } => Mode::Mphf,
            BucketLayout::Plain { .. } => Mode::Phf,
        }
    }

    /// Size of the output range: `n` for minimal functions, `2 tau` otherwise.
    pub fn range(&self) -> usize {
        match self.layout {
            BucketLayout::Minimal { .. } => self.n,
            BucketLayout::Plain { .. } => 2 * self.tau,
        }
    }

    #[inline]
    fn t1(&self, v: usize) -> bool {
        match &self.layout {
            BucketLayout::Minimal { t2, t1c } => t2.get(v) && t1c.get(t2.rank1(v)),
            BucketLayout::Plain { t1 } => t1.get(v),
        }
    }

    /// Evaluates the function on a key's hash pair. For keys outside the
    /// build set the result is arbitrary but below [`range`](Self::range)
    /// whenever the range is nonempty.
    #[inline]
    pub fn evaluate_pair(&self, pair: (u32, u32)) -> usize {
        if self.n == 0 {
            return 0;
        }
        let v = phi(|v| self.t1(v), pair, self.tau);
        match &self.layout {
            BucketLayout::Minimal { t2, .. } => t2.rank1(v).min(self.n - 1),
            BucketLayout::Plain { .. } => v,
        }
    }
}

/// Parameters of the internal algorithm.
#[derive(Clone, Copy, Debug)]
pub struct InternalParams {
    pub epsilon: Epsilon,
    pub kappa: u32,
    pub mode: Mode,
    pub max_attempts: u32,
}

impl Default for InternalParams {
    fn default() -> Self {
        InternalParams {
            epsilon: Epsilon::DEFAULT,
            kappa: 128,
            mode: Mode::Mphf,
            max_attempts: 1000,
        }
    }
}

/// Builds the function for `fps`, retrying random seeds until the graph is
/// acyclic. Returns the function and the number of seeds tried.
pub fn build_bucket_function<R, P>(
    fps: &[Fingerprint128],
    pair: P,
    params: &InternalParams,
    rng: &mut R,
) -> Result<(BucketFunction, u32)>
where
    R: Rng,
    P: Fn(Fingerprint128, BucketSeed, u32) -> (u32, u32),
{
    if fps.is_empty() {
        return Ok((BucketFunction::empty(params.mode, params.kappa), 0));
    }
    let n = fps.len();
    let tau = params.epsilon.tau(n);
    let found = find_seed(
        fps,
        tau as u32,
        &pair,
        |pairs| BipartiteGraph::new(pairs, tau).label_t1(),
        rng,
        params.max_attempts,
    )?;
    let t1 = found.accepted;
    let seed = found.seed;
    let images: Vec<usize> = fps
        .iter()
        .map(|&fp| phi(|v| t1.get(v), pair(fp, seed, tau as u32), tau))
        .collect();

    let layout = match params.mode {
        Mode::Phf => BucketLayout::Plain { t1 },
        Mode::Mphf => {
            let mut t2 = BitVector::new(2 * tau);
            for &v in &images {
                t2.set(v, true);
            }
            let t2 = RankedBitVector::new(t2, params.kappa);
            let mut t1c = BitVector::new(n);
            for &v in &images {
                t1c.set(t2.rank1(v), t1.get(v));
            }
            BucketLayout::Minimal { t2, t1c }
        }
    };
    Ok((
        BucketFunction {
            seed: seed.get(),
            tau,
            n,
            layout,
        },
        found.attempts,
    ))
}

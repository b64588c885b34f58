//! Deterministic random LP generator for cross-checking the solver against
//! the vertex oracle. Coefficients are small multiples of 0.5 so vertices
//! are well separated and status classification is unambiguous.

use super::LpProblem;

/// SplitMix64: tiny deterministic PRNG, identical on every platform.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, n).
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    /// Uniform float in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Integer multiple of 0.5 in [-max, max].
    fn half_step(&mut self, max: f64) -> f64 {
        let steps = (2.0 * max) as u64;
        self.below(2 * steps + 1) as f64 * 0.5 - max
    }
}

/// A random LP with at most `max_vars` variables. The mix includes two-sided
/// boxes, one-sided and free variables, plus random equality rows, so the
/// population contains optimal, infeasible and unbounded instances.
pub fn random_lp(seed: u64, max_vars: usize) -> LpProblem {
    let mut rng = SplitMix64::new(seed.wrapping_mul(0x5851F42D4C957F2D).wrapping_add(1));
    let n = 1 + rng.below(max_vars as u64) as usize;
    let mut p = LpProblem::new(n);

    for j in 0..n {
        p.objective[j] = rng.half_step(4.0);
        // Mostly boxed variables, with a sprinkling of free and one-sided
        // ones so infeasible and unbounded instances appear too.
        let kind = rng.below(16);
        p.bounds[j] = match kind {
            0 => (f64::NEG_INFINITY, f64::INFINITY),
            1 => (0.0, f64::INFINITY),
            2 => (f64::NEG_INFINITY, rng.half_step(4.0)),
            _ => {
                let lo = rng.half_step(4.0);
                let width = 0.5 + rng.below(12) as f64 * 0.5;
                (lo, lo + width)
            }
        };
    }

    // Anchor the right-hand sides near an interior reference point so most
    // instances are feasible; the random slack occasionally cuts the point
    // off and produces infeasible instances.
    let x_ref: Vec<f64> = p
        .bounds
        .iter()
        .map(|&(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
            (true, true) => lo + 0.5 * (hi - lo),
            (true, false) => lo + 1.0,
            (false, true) => hi - 1.0,
            (false, false) => rng.half_step(2.0),
        })
        .collect();

    let n_eq = rng.below(3) as usize;
    let n_ub = rng.below(5) as usize;
    for i in 0..n_eq {
        let entries = random_row(&mut rng, n);
        let anchored: f64 = entries.iter().map(|&(j, v)| v * x_ref[j]).sum();
        let rhs = anchored + rng.half_step(2.0);
        p.add_eq(entries, rhs, format!("eq{i}"));
    }
    for i in 0..n_ub {
        let entries = random_row(&mut rng, n);
        let anchored: f64 = entries.iter().map(|&(j, v)| v * x_ref[j]).sum();
        let rhs = anchored + rng.half_step(4.0);
        p.add_ub(entries, rhs, format!("ub{i}"));
    }
    p
}

fn random_row(rng: &mut SplitMix64, n: usize) -> Vec<(usize, f64)> {
    let mut entries = Vec::new();
    for j in 0..n {
        if rng.unit() < 0.7 {
            let v = rng.half_step(3.0);
            if v != 0.0 {
                entries.push((j, v));
            }
        }
    }
    if entries.is_empty() {
        entries.push((rng.below(n as u64) as usize, 1.0));
    }
    entries
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        let a = random_lp(42, 6);
        let b = random_lp(42, 6);
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_vary_structure() {
        let a = random_lp(1, 6);
        let b = random_lp(2, 6);
        assert_ne!(a, b);
    }
}

//! Interior/exterior labeling and shell extraction.
//!
//! The MRF couples a per-cell data term (deviation from estimated occupancy,
//! averaged over cells) with an area-weighted smoothness term over adjacent
//! cell pairs. Both label states and nonnegative pairwise weights make the
//! energy binary submodular, so a single s-t min-cut yields the global
//! optimum. The surface is the outer shell of the interior-cell union; it is
//! closed by construction because the cells tile the bounds.

mod maxflow;
mod shell;

pub use shell::{extract_shell, merge_coplanar, merge_coplanar_with_stats, FaceProvenance,
    MergeStats, Shell};

use serde::{Deserialize, Serialize};

use crate::complex::CellComplex;
use crate::error::{Error, Result};
use crate::occupancy::CellOccupancies;
use maxflow::FlowNetwork;

/// Default smoothness weight.
pub const DEFAULT_LAMBDA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    In,
    Out,
}

/// Binary in/out assignment, one label per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeling(pub Vec<Label>);

impl Labeling {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_in(&self, i: usize) -> bool {
        self.0[i] == Label::In
    }

    pub fn interior_count(&self) -> usize {
        self.0.iter().filter(|&&l| l == Label::In).count()
    }
}

/// One pairwise smoothness term between adjacent cells.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairwiseTerm {
    pub a: usize,
    pub b: usize,
    /// lambda * area_ratio — the weight that enters the energy.
    pub weight: f64,
    /// Shared-face area over the complex's maximum face area.
    pub area_ratio: f64,
}

/// The binary labeling problem: unary costs are (cost_in, cost_out) =
/// ((1 - o_i)/n, o_i/n); pairwise weights are lambda * a_ij / A with A the
/// maximum face area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MrfProblem {
    pub unary: Vec<(f64, f64)>,
    pub pairwise: Vec<PairwiseTerm>,
    pub lambda: f64,
    pub max_area: f64,
}

impl MrfProblem {
    pub fn len(&self) -> usize {
        self.unary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unary.is_empty()
    }

    /// Assemble a problem from bare occupancies and (a, b, shared_area)
    /// adjacency triples.
    pub fn from_parts(
        occupancies: &[f64],
        shared_areas: &[(usize, usize, f64)],
        lambda: f64,
    ) -> Result<MrfProblem> {
        if occupancies.is_empty() {
            return Err(Error::Extraction("empty cell complex".into()));
        }
        if lambda < 0.0 {
            return Err(Error::Extraction("lambda must be nonnegative".into()));
        }
        let n = occupancies.len() as f64;
        let unary = occupancies
            .iter()
            .map(|&o| ((1.0 - o) / n, o / n))
            .collect();
        let max_area = shared_areas
            .iter()
            .map(|&(_, _, a)| a)
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let pairwise = shared_areas
            .iter()
            .map(|&(a, b, area)| {
                let area_ratio = area / max_area;
                PairwiseTerm {
                    a,
                    b,
                    weight: lambda * area_ratio,
                    area_ratio,
                }
            })
            .collect();
        Ok(MrfProblem {
            unary,
            pairwise,
            lambda,
            max_area,
        })
    }
}

/// Build the MRF for a complex with estimated occupancies.
pub fn build_mrf(
    complex: &CellComplex,
    occupancies: &CellOccupancies,
    lambda: f64,
) -> Result<MrfProblem> {
    if complex.is_empty() {
        return Err(Error::Extraction("empty cell complex".into()));
    }
    if occupancies.cells.len() != complex.len() {
        return Err(Error::Extraction(format!(
            "{} occupancies for {} cells",
            occupancies.cells.len(),
            complex.len()
        )));
    }
    let o: Vec<f64> = occupancies.values().collect();
    let areas: Vec<(usize, usize, f64)> = complex
        .adjacency()
        .iter()
        .map(|adj| (adj.a, adj.b, adj.area))
        .collect();
    MrfProblem::from_parts(&o, &areas, lambda)
}

/// Exact MRF energy of a labeling: data term plus the lambda-scaled
/// smoothness term.
pub fn energy(problem: &MrfProblem, labeling: &Labeling) -> f64 {
    assert_eq!(labeling.len(), problem.len(), "labeling length mismatch");
    let mut total = 0.0;
    for (i, &(cost_in, cost_out)) in problem.unary.iter().enumerate() {
        total += if labeling.is_in(i) { cost_in } else { cost_out };
    }
    for term in &problem.pairwise {
        if labeling.is_in(term.a) != labeling.is_in(term.b) {
            total += term.weight;
        }
    }
    total
}

/// The smoothness term V(x) alone (area ratios of label-crossing faces).
pub fn smoothness(problem: &MrfProblem, labeling: &Labeling) -> f64 {
    problem
        .pairwise
        .iter()
        .filter(|t| labeling.is_in(t.a) != labeling.is_in(t.b))
        .map(|t| t.area_ratio)
        .sum()
}

/// Globally minimize the energy by s-t min-cut. Source side = In; among
/// minimizers the cut closest to the source is returned, deterministically.
pub fn solve_mincut(problem: &MrfProblem) -> Labeling {
    let n = problem.len();
    let (s, t) = (n, n + 1);
    let mut net = FlowNetwork::new(n + 2);
    for (i, &(cost_in, cost_out)) in problem.unary.iter().enumerate() {
        // Cutting i from the source pays the Out cost; from the sink, In.
        net.add_edge(s, i, cost_out, 0.0);
        net.add_edge(i, t, cost_in, 0.0);
    }
    for term in &problem.pairwise {
        net.add_edge(term.a, term.b, term.weight, term.weight);
    }
    net.max_flow(s, t);
    let side = net.source_side(s);
    Labeling(
        (0..n)
            .map(|i| if side[i] { Label::In } else { Label::Out })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn brute_force_min(problem: &MrfProblem) -> (f64, Labeling) {
        let n = problem.len();
        assert!(n <= 20);
        let mut best = (f64::INFINITY, Labeling(vec![Label::Out; n]));
        for mask in 0u32..(1 << n) {
            let labeling = Labeling(
                (0..n)
                    .map(|i| {
                        if mask & (1 << i) != 0 {
                            Label::In
                        } else {
                            Label::Out
                        }
                    })
                    .collect(),
            );
            let e = energy(problem, &labeling);
            if e < best.0 {
                best = (e, labeling);
            }
        }
        best
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, lambda: f64) -> MrfProblem {
        let occupancies: Vec<f64> = (0..n).map(|_| rng.random_range(0.001..0.999)).collect();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.random_bool(0.3) {
                    edges.push((a, b, rng.random_range(0.01..1.0)));
                }
            }
        }
        MrfProblem::from_parts(&occupancies, &edges, lambda).unwrap()
    }

    #[test]
    fn unary_costs_from_occupancy() {
        let p = MrfProblem::from_parts(&[0.9], &[], 0.5).unwrap();
        assert!((p.unary[0].0 - 0.1).abs() < 1e-12);
        assert!((p.unary[0].1 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_means_no_pairwise_weight() {
        let p = MrfProblem::from_parts(&[0.5, 0.5], &[(0, 1, 3.0)], 0.0).unwrap();
        assert_eq!(p.pairwise[0].weight, 0.0);
        assert!((p.pairwise[0].area_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn max_area_face_weight_is_lambda() {
        let p =
            MrfProblem::from_parts(&[0.5, 0.5, 0.5], &[(0, 1, 2.0), (1, 2, 0.5)], 0.25).unwrap();
        assert!((p.pairwise[0].weight - 0.25).abs() < 1e-12);
        assert!((p.pairwise[1].weight - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn energy_examples() {
        // Labels equal to rounded occupancies, uniform: D = 0.
        let p = MrfProblem::from_parts(&[1.0, 1.0], &[(0, 1, 1.0)], 7.0).unwrap();
        let all_in = Labeling(vec![Label::In, Label::In]);
        assert_eq!(energy(&p, &all_in), 0.0);
        // Two cells o = (0.9, 0.1), labels (in, out), a12 = A:
        // E = (0.1 + 0.1)/2 + lambda.
        let p = MrfProblem::from_parts(&[0.9, 0.1], &[(0, 1, 5.0)], 0.3).unwrap();
        let mixed = Labeling(vec![Label::In, Label::Out]);
        assert!((energy(&p, &mixed) - (0.1 + 0.3)).abs() < 1e-12);
    }

    /// Independent evaluator written straight from the energy definition:
    /// E = (1/|C|) sum |x_i - o_i| + (lambda/A) sum a_ij [x_i != x_j].
    fn energy_reference(
        occupancies: &[f64],
        edges: &[(usize, usize, f64)],
        lambda: f64,
        labeling: &Labeling,
    ) -> f64 {
        let n = occupancies.len() as f64;
        let max_area = edges.iter().map(|e| e.2).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut data = 0.0;
        for (i, &o) in occupancies.iter().enumerate() {
            let x = if labeling.is_in(i) { 1.0 } else { 0.0 };
            data += (x - o).abs() / n;
        }
        let mut smooth = 0.0;
        for &(a, b, area) in edges {
            if labeling.is_in(a) != labeling.is_in(b) {
                smooth += lambda * (area / max_area);
            }
        }
        data + smooth
    }

    #[test]
    fn energy_matches_reference_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..50 {
            let n = 10;
            let occupancies: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut edges = Vec::new();
            for a in 0..n {
                for b in (a + 1)..n {
                    if rng.random_bool(0.4) {
                        edges.push((a, b, rng.random_range(0.1..2.0)));
                    }
                }
            }
            let lambda = rng.random_range(0.0..0.1);
            let p = MrfProblem::from_parts(&occupancies, &edges, lambda).unwrap();
            let labeling = Labeling(
                (0..n)
                    .map(|_| {
                        if rng.random_bool(0.5) {
                            Label::In
                        } else {
                            Label::Out
                        }
                    })
                    .collect(),
            );
            let ours = energy(&p, &labeling);
            let reference = energy_reference(&occupancies, &edges, lambda, &labeling);
            assert!(
                (ours - reference).abs() < 1e-14,
                "{ours} vs reference {reference}"
            );
        }
    }

    #[test]
    fn mincut_examples() {
        // Clear split.
        let p = MrfProblem::from_parts(&[0.99, 0.01], &[(0, 1, 1.0)], 0.001).unwrap();
        let labeling = solve_mincut(&p);
        assert_eq!(labeling.0, vec![Label::In, Label::Out]);
        let (bf, _) = brute_force_min(&p);
        assert_eq!(energy(&p, &labeling), bf);

        // Strong coupling forces agreement; D ties at 0.5 either way, and
        // the source-closest cut picks Out deterministically.
        let p = MrfProblem::from_parts(&[0.6, 0.4], &[(0, 1, 1.0)], 10.0).unwrap();
        let labeling = solve_mincut(&p);
        assert_eq!(labeling.0[0], labeling.0[1]);
        let (bf, _) = brute_force_min(&p);
        assert_eq!(energy(&p, &labeling), bf);
        let again = solve_mincut(&p);
        assert_eq!(labeling, again);
    }

    #[test]
    fn mincut_is_exact_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for trial in 0..60 {
            let n = 2 + (trial % 15);
            for lambda in [0.0, 1e-3, 1.0] {
                let p = random_problem(&mut rng, n, lambda);
                let labeling = solve_mincut(&p);
                let (bf, _) = brute_force_min(&p);
                assert_eq!(
                    energy(&p, &labeling),
                    bf,
                    "n={n} lambda={lambda}: {} vs {}",
                    energy(&p, &labeling),
                    bf
                );
            }
        }
    }

    #[test]
    fn lambda_zero_is_thresholding() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let p = random_problem(&mut rng, 12, 0.0);
            let labeling = solve_mincut(&p);
            for (i, &(cost_in, cost_out)) in p.unary.iter().enumerate() {
                // cost_in < cost_out iff o > 0.5.
                if cost_in < cost_out {
                    assert!(labeling.is_in(i));
                } else if cost_out < cost_in {
                    assert!(!labeling.is_in(i));
                }
            }
        }
    }

    #[test]
    fn smoothness_is_monotone_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let occupancies: Vec<f64> = (0..14).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut edges = Vec::new();
            for a in 0..14 {
                for b in (a + 1)..14 {
                    if rng.random_bool(0.25) {
                        edges.push((a, b, rng.random_range(0.05..1.0)));
                    }
                }
            }
            let mut previous = f64::INFINITY;
            for lambda in [1e-4, 1e-3, 1e-2, 1e-1] {
                let p = MrfProblem::from_parts(&occupancies, &edges, lambda).unwrap();
                let labeling = solve_mincut(&p);
                let v = smoothness(&p, &labeling);
                assert!(
                    v <= previous + 1e-12,
                    "V increased from {previous} to {v} at lambda {lambda}"
                );
                previous = v;
            }
        }
    }
}

use condensate_core::chaos::{classify_dynamics, detect_period, lyapunov_spectrum, DynamicsClass, ZERO_TOL};
use condensate_core::dynamics::{find_attractor, random_initial, AttractorKind, AttractorRecord};
use condensate_core::obc::{edge_extent, order_parameters};
use serde::{Deserialize, Serialize};

use crate::spec::{derive_seed, DedupTolerances, SweepSpec};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Vacuum,
    StaticCondensate,
    /// Time dependent with `<omega> > omega_tol`.
    DynamicCW,
    /// Time dependent with `<omega> < -omega_tol`.
    DynamicCCW,
    /// Time dependent with `|<omega>| <= omega_tol`.
    DynamicMixed,
}

impl Label {
    pub const ALL: [Label; 5] =
        [Label::Vacuum, Label::StaticCondensate, Label::DynamicCW, Label::DynamicCCW, Label::DynamicMixed];

    pub fn is_dynamic(self) -> bool {
        matches!(self, Label::DynamicCW | Label::DynamicCCW | Label::DynamicMixed)
    }

    /// Parses a label or a group name (`dynamic` = all three dynamic labels).
    pub fn parse_group(s: &str) -> Option<Vec<Label>> {
        let one = |l| Some(vec![l]);
        match s.to_ascii_lowercase().as_str() {
            "vacuum" => one(Label::Vacuum),
            "static" | "staticcondensate" => one(Label::StaticCondensate),
            "cw" | "dynamiccw" => one(Label::DynamicCW),
            "ccw" | "dynamicccw" => one(Label::DynamicCCW),
            "mixed" | "dynamicmixed" => one(Label::DynamicMixed),
            "dynamic" => Some(vec![Label::DynamicCW, Label::DynamicCCW, Label::DynamicMixed]),
            _ => None,
        }
    }
}

/// One deduplicated attractor of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorSummary {
    pub label: Label,
    /// Present only when exponents were computed (or for fixed points).
    pub class: Option<DynamicsClass>,
    /// Bulk `<omega>`.
    pub omega: f64,
    pub q: f64,
    pub amp: f64,
    pub density_rate: f64,
    pub edge_extent: usize,
    pub period: Option<f64>,
    pub exponents: Option<Vec<f64>>,
    /// Initial-condition indices that reached this attractor, ascending.
    pub basin: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub index: usize,
    pub kappa: f64,
    pub gamma: f64,
    /// Ordered by the smallest initial-condition index in each basin.
    pub attractors: Vec<AttractorSummary>,
    pub multistable: bool,
    /// Per-initial-condition seeds.
    pub seed: Vec<u64>,
    pub warnings: Vec<String>,
}

impl PhaseCell {
    /// Label of the attractor with the largest basin (ties: first listed).
    pub fn dominant(&self) -> Option<Label> {
        let mut best: Option<&AttractorSummary> = None;
        for a in &self.attractors {
            if best.is_none_or(|b| a.basin.len() > b.basin.len()) {
                best = Some(a);
            }
        }
        best.map(|a| a.label)
    }
}

fn classify_label(rec: &AttractorRecord, omega: f64, omega_tol: f64) -> Label {
    match rec.kind {
        AttractorKind::FixedPoint if rec.is_vacuum() => Label::Vacuum,
        AttractorKind::FixedPoint => Label::StaticCondensate,
        _ if omega > omega_tol => Label::DynamicCW,
        _ if omega < -omega_tol => Label::DynamicCCW,
        _ => Label::DynamicMixed,
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// Identity test used for deduplication; symmetric by construction.
pub fn same_attractor(a: &AttractorSummary, b: &AttractorSummary, tol: &DedupTolerances) -> bool {
    if a.label != b.label {
        return false;
    }
    if a.label == Label::Vacuum {
        return true;
    }
    let amp_scale = a.amp.abs().max(b.amp.abs());
    let amp_ok = amp_scale == 0.0 || (a.amp - b.amp).abs() <= tol.amplitude * amp_scale;
    let period_ok = a.label != Label::DynamicMixed
        || match (a.period, b.period) {
            (Some(x), Some(y)) => (x - y).abs() <= tol.period * x.max(y),
            (None, None) => true,
            _ => false,
        };
    (a.omega - b.omega).abs() < tol.omega
        && angle_gap(a.q, b.q) < tol.q
        && amp_ok
        && period_ok
        && a.edge_extent.abs_diff(b.edge_extent) <= tol.edge_extent
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = i;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    /// Keeps the smaller index as root so representatives are stable.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Groups attractors by the transitive closure of [`same_attractor`]. Each
/// group is represented by its member with the smallest basin index, and
/// the merged basin is the union of the members' basins.
pub fn deduplicate(mut items: Vec<AttractorSummary>, tol: &DedupTolerances) -> Vec<AttractorSummary> {
    items.sort_by_key(|a| a.basin.first().copied().unwrap_or(usize::MAX));
    let n = items.len();
    let mut uf = UnionFind((0..n).collect());
    for i in 0..n {
        for j in i + 1..n {
            if same_attractor(&items[i], &items[j], tol) {
                uf.union(i, j);
            }
        }
    }
    let mut out: Vec<(usize, AttractorSummary)> = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        match out.iter_mut().find(|(root, _)| *root == r) {
            Some((_, rep)) => rep.basin.extend(items[i].basin.iter().copied()),
            None => out.push((r, items[i].clone())),
        }
    }
    let mut reps: Vec<AttractorSummary> = out.into_iter().map(|(_, a)| a).collect();
    for a in reps.iter_mut() {
        a.basin.sort_unstable();
    }
    reps.sort_by_key(|a| a.basin[0]);
    reps
}

/// Runs every initial condition of one cell, classifies and deduplicates.
/// Per-condition failures become warnings.
pub fn evaluate_cell(spec: &SweepSpec, index: usize) -> Result<PhaseCell> {
    let seeds: Vec<u64> = (0..spec.n_initial_conditions).map(|ic| derive_seed(spec.base_seed, index, ic)).collect();
    evaluate_cell_with_seeds(spec, index, seeds)
}

/// [`evaluate_cell`] with explicit initial-condition seeds in place of the
/// derived ones. `ic_scales` still cycles over the seed index.
pub fn evaluate_cell_with_seeds(spec: &SweepSpec, index: usize, seeds: Vec<u64>) -> Result<PhaseCell> {
    let (kappa, gamma) = spec.cell_coords(index);
    let params = spec.cell_params(index)?;
    let mut warnings = Vec::new();
    let mut found: Vec<(AttractorSummary, AttractorRecord)> = Vec::new();
    for (ic, &seed) in seeds.iter().enumerate() {
        let outcome = random_initial(&params, seed, spec.ic_scale(ic))
            .and_then(|init| find_attractor(&params, &init, &spec.integration))
            .and_then(|rec| {
                let op = order_parameters(&rec.window, None)?;
                Ok((rec, op))
            });
        let (rec, op) = match outcome {
            Ok(x) => x,
            Err(e) => {
                warnings.push(format!("ic {ic}: {e}"));
                continue;
            }
        };
        warnings.extend(rec.warnings.iter().map(|w| format!("ic {ic}: {w}")));
        let label = classify_label(&rec, op.mean_frequency, spec.omega_tol);
        let period = if label.is_dynamic() && (spec.analysis.period || label == Label::DynamicMixed) {
            detect_period(&rec.window, None).unwrap_or_else(|e| {
                warnings.push(format!("ic {ic}: period detection: {e}"));
                None
            })
        } else {
            None
        };
        let fixed = rec.kind == AttractorKind::FixedPoint;
        let summary = AttractorSummary {
            label,
            class: if fixed { classify_dynamics(None, &rec, ZERO_TOL).ok() } else { None },
            omega: op.mean_frequency,
            q: op.mean_wavevector,
            amp: op.mean_amplitude,
            density_rate: op.mean_density_rate,
            edge_extent: edge_extent(&op.edge_density_rate_profile),
            period,
            exponents: None,
            basin: vec![ic],
        };
        found.push((summary, rec));
    }
    let summaries: Vec<AttractorSummary> = found.iter().map(|(s, _)| s.clone()).collect();
    let mut attractors = deduplicate(summaries, &spec.dedup);
    if let Some(cfg) = &spec.analysis.lyapunov {
        for a in attractors.iter_mut().filter(|a| a.label.is_dynamic()) {
            let rec = &found.iter().find(|(s, _)| s.basin[0] == a.basin[0]).expect("representative exists").1;
            match lyapunov_spectrum(&params, rec.terminal(), cfg)
                .and_then(|l| classify_dynamics(Some(&l), rec, ZERO_TOL).map(|c| (l, c)))
            {
                Ok((l, c)) => {
                    a.exponents = Some(l.exponents);
                    a.class = Some(c);
                }
                Err(e) => warnings.push(format!("ic {}: lyapunov: {e}", a.basin[0])),
            }
        }
    }
    Ok(PhaseCell { index, kappa, gamma, multistable: attractors.len() >= 2, attractors, seed: seeds, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn summary(label: Label, omega: f64, q: f64, amp: f64, edge: usize, basin: usize) -> AttractorSummary {
        AttractorSummary {
            label,
            class: None,
            omega,
            q,
            amp,
            density_rate: 0.0,
            edge_extent: edge,
            period: None,
            exponents: None,
            basin: vec![basin],
        }
    }

    #[test]
    fn chained_pairs_merge_transitively() {
        let tol = DedupTolerances::default();
        let a = summary(Label::DynamicCW, 1.000, 0.5, 1.0, 0, 0);
        let b = summary(Label::DynamicCW, 1.008, 0.5, 1.0, 0, 1);
        let c = summary(Label::DynamicCW, 1.016, 0.5, 1.0, 0, 2);
        assert!(!same_attractor(&a, &c, &tol));
        let out = deduplicate(vec![c, a, b], &tol);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].basin, vec![0, 1, 2]);
    }

    #[test]
    fn edge_extent_separates_otherwise_close_states() {
        let tol = DedupTolerances::default();
        let a = summary(Label::DynamicCCW, -1.3869, 0.8046, 1.0131, 0, 0);
        let b = summary(Label::DynamicCCW, -1.3935, 0.7999, 1.0118, 13, 1);
        assert_eq!(deduplicate(vec![a, b], &tol).len(), 2);
    }

    #[test]
    fn wavevector_compared_on_the_circle() {
        let tol = DedupTolerances::default();
        let a = summary(Label::DynamicCW, 1.0, std::f64::consts::PI - 1e-3, 1.0, 0, 0);
        let b = summary(Label::DynamicCW, 1.0, -std::f64::consts::PI + 1e-3, 1.0, 0, 1);
        assert!(same_attractor(&a, &b, &tol));
    }

    #[test]
    fn mixed_states_need_matching_periods() {
        let tol = DedupTolerances::default();
        let mut a = summary(Label::DynamicMixed, 0.0, 1.57, 1.4, 11, 0);
        let mut b = a.clone();
        b.basin = vec![1];
        a.period = Some(26.65);
        b.period = Some(27.2);
        assert!(!same_attractor(&a, &b, &tol));
        b.period = Some(26.70);
        assert!(same_attractor(&a, &b, &tol));
        b.period = None;
        assert!(!same_attractor(&a, &b, &tol));
    }

    #[test]
    fn dominant_prefers_larger_basin() {
        let mut big = summary(Label::DynamicCCW, -1.0, 0.5, 1.0, 0, 1);
        big.basin = vec![1, 2, 3];
        let cell = PhaseCell {
            index: 0,
            kappa: 1.0,
            gamma: 0.2,
            attractors: vec![summary(Label::DynamicCW, 1.0, 2.6, 1.0, 0, 0), big],
            multistable: true,
            seed: vec![],
            warnings: vec![],
        };
        assert_eq!(cell.dominant(), Some(Label::DynamicCCW));
    }

    fn arb_summary() -> impl Strategy<Value = AttractorSummary> {
        (0usize..3, -0.05f64..0.05, -0.05f64..0.05, 0.98f64..1.02, 0usize..4).prop_map(|(l, w, q, a, e)| {
            let label = [Label::DynamicCW, Label::DynamicCCW, Label::DynamicMixed][l];
            summary(label, 1.0 + w, 0.5 + q, a, e, 0)
        })
    }

    proptest! {
        #[test]
        fn identity_relation_is_symmetric(a in arb_summary(), b in arb_summary()) {
            let tol = DedupTolerances::default();
            prop_assert_eq!(same_attractor(&a, &b, &tol), same_attractor(&b, &a, &tol));
        }

        #[test]
        fn dedup_is_closed_and_order_independent(items in prop::collection::vec(arb_summary(), 1..12)) {
            let tol = DedupTolerances::default();
            let items: Vec<AttractorSummary> = items
                .into_iter()
                .enumerate()
                .map(|(i, mut a)| { a.basin = vec![i]; a })
                .collect();
            let out = deduplicate(items.clone(), &tol);
            // Representatives of different groups are never related.
            for i in 0..out.len() {
                for j in i + 1..out.len() {
                    let gi = &out[i].basin;
                    let gj = &out[j].basin;
                    for &x in gi {
                        for &y in gj {
                            prop_assert!(!same_attractor(&items[x], &items[y], &tol));
                        }
                    }
                }
            }
            let total: usize = out.iter().map(|a| a.basin.len()).sum();
            prop_assert_eq!(total, items.len());
            let mut rev = items.clone();
            rev.reverse();
            let out_rev = deduplicate(rev, &tol);
            let basins = |v: &[AttractorSummary]| v.iter().map(|a| a.basin.clone()).collect::<Vec<_>>();
            prop_assert_eq!(basins(&out), basins(&out_rev));
        }
    }
}

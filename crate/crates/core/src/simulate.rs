//! Cluster and path sampling through the Poisson cluster decomposition.
//!
//! A path is `N = D₀ + Σ_n (T_n + cluster_n)`: immigrants `T_n` form a
//! Poisson process of rate `λ` on `(0, T]`, each carries an independent
//! branching cluster, and `D₀` collects the initial points together with
//! their descendants on `(0, ∞)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transfer::{TransferError, TransferFunction};

/// Hard limit on the number of points in one cluster.
pub const SIZE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error("cluster exceeded {cap} points", cap = SIZE_CAP)]
    SizeCap { partial: Box<Cluster> },
    #[error("invalid simulation input: {0}")]
    InvalidInput(String),
}

/// One branching cluster, times relative to its root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Sorted birth times; `times[0] == 0` is the root.
    pub times: Vec<f64>,
    /// Parent index of each point (`None` for the root). Parents precede children.
    pub parents: Vec<Option<usize>>,
    pub generations: Vec<u32>,
    /// Last birth time, the cluster length `L`.
    pub length: f64,
}

impl Cluster {
    fn root() -> Self {
        Self { times: vec![0.0], parents: vec![None], generations: vec![0], length: 0.0 }
    }

    /// Builds a cluster from birth times (root first at 0) and parent links in any order.
    pub fn new(times: Vec<f64>, parents: Vec<Option<usize>>) -> Result<Self, SimError> {
        if times.len() != parents.len() || times.is_empty() {
            return Err(SimError::InvalidInput("times and parents must be nonempty and of equal length".into()));
        }
        if parents.iter().enumerate().any(|(i, p)| p.is_some_and(|p| p >= times.len() || p == i)) {
            return Err(SimError::InvalidInput("parent index out of range".into()));
        }
        let cluster = Self::from_unsorted(times, parents);
        if !cluster.is_valid_genealogy() {
            return Err(SimError::InvalidInput("not a time-ordered tree rooted at 0".into()));
        }
        Ok(cluster)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Rebuilds the cluster from breadth-first order, sorting by time.
    fn from_unsorted(times: Vec<f64>, parents: Vec<Option<usize>>) -> Self {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
        let mut position = vec![0usize; times.len()];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let mut generations = vec![0u32; times.len()];
        let mut sorted_parents = vec![None; times.len()];
        for (new, &old) in order.iter().enumerate() {
            sorted_parents[new] = parents[old].map(|p| position[p]);
        }
        for i in 0..times.len() {
            if let Some(p) = sorted_parents[i] {
                generations[i] = generations[p] + 1;
            }
        }
        let sorted_times: Vec<f64> = order.iter().map(|&i| times[i]).collect();
        let length = sorted_times.last().copied().unwrap_or(0.0);
        Self { times: sorted_times, parents: sorted_parents, generations, length }
    }

    /// Tree checks: root at 0, parents earlier in the list and strictly earlier in time.
    pub fn is_valid_genealogy(&self) -> bool {
        if self.times.first() != Some(&0.0) || self.parents.first() != Some(&None) {
            return false;
        }
        let sorted = self.times.windows(2).all(|w| w[0] <= w[1]);
        let tree = self.parents.iter().enumerate().skip(1).all(|(i, p)| match p {
            Some(p) => *p < i && self.times[*p] < self.times[i],
            None => false,
        });
        sorted && tree && self.length == *self.times.last().unwrap()
    }
}

/// Branching population rooted at time 0, expanded breadth-first.
/// Children of the root come from `first_generation` when given.
fn grow<R: rand::Rng + ?Sized>(
    h: &TransferFunction,
    first_generation: Option<Vec<f64>>,
    cap: usize,
    rng: &mut R,
) -> Result<Cluster, SimError> {
    let mut times = vec![0.0];
    let mut parents = vec![None];
    let mut next = 0;
    let mut first_generation = first_generation;
    while next < times.len() {
        let births: Vec<f64> = match (next, first_generation.take()) {
            (0, Some(births)) => births,
            _ => {
                let n = h.offspring_count(rng);
                let mut births = Vec::with_capacity(n);
                for _ in 0..n {
                    births.push(h.sample_delay(rng)?);
                }
                births
            }
        };
        for d in births {
            times.push(times[next] + d);
            parents.push(Some(next));
        }
        if times.len() > cap {
            return Err(SimError::SizeCap { partial: Box::new(Cluster::from_unsorted(times, parents)) });
        }
        next += 1;
    }
    Ok(Cluster::from_unsorted(times, parents))
}

/// Samples the cluster of an ancestor born at time 0.
pub fn sample_cluster<R: rand::Rng + ?Sized>(
    h: &TransferFunction,
    rng: &mut R,
) -> Result<Cluster, SimError> {
    h.check_subcritical()?;
    if h.l1_norm() == 0.0 {
        return Ok(Cluster::root());
    }
    grow(h, None, SIZE_CAP, rng)
}

/// Descendants on `(0, ∞)` of one initial point, as a cluster rooted at that point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialProgeny {
    /// Index into `PathRecord::init_points`.
    pub source: usize,
    /// The initial point `s ≤ 0`; cluster times are relative to it.
    pub origin: f64,
    pub cluster: Cluster,
}

impl InitialProgeny {
    /// Last point of the record in absolute time (the initial point itself if childless).
    pub fn last_point(&self) -> f64 {
        self.origin + self.cluster.length
    }
}

fn check_init_points(init_points: &[f64]) -> Result<(), SimError> {
    if init_points.iter().any(|s| !(s.is_finite() && *s <= 0.0)) {
        return Err(SimError::InvalidInput("initial points must be finite and ≤ 0".into()));
    }
    if init_points.windows(2).any(|w| w[1] < w[0]) {
        return Err(SimError::InvalidInput("initial points must be sorted".into()));
    }
    Ok(())
}

/// Samples `D₀`: first-generation births on `(0, ∞)` of each initial point,
/// each grown into a full subtree.
pub fn sample_initial_progeny<R: rand::Rng + ?Sized>(
    init_points: &[f64],
    h: &TransferFunction,
    rng: &mut R,
) -> Result<Vec<InitialProgeny>, SimError> {
    check_init_points(init_points)?;
    h.check_subcritical()?;
    init_points
        .iter()
        .enumerate()
        .map(|(source, &s)| {
            let births: Vec<f64> =
                h.truncated_offspring(-s, rng).into_iter().map(|u| u - s).collect();
            let cluster = if births.is_empty() { Cluster::root() } else { grow(h, Some(births), SIZE_CAP, rng)? };
            Ok(InitialProgeny { source, origin: s, cluster })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Immigrant,
    Initial,
}

/// One point of a path with its genealogy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    /// Ancestor index for immigrants, initial-point index for `Origin::Initial`.
    pub cluster_id: usize,
    /// Index of the parent event in `PathRecord::events`.
    pub parent: Option<usize>,
    pub generation: u32,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ancestor {
    pub arrival: f64,
    pub cluster: Cluster,
}

impl Ancestor {
    /// Extinction time `T_n + L_n`.
    pub fn last_point(&self) -> f64 {
        self.arrival + self.cluster.length
    }
}

/// A simulated path. Descendants born after `horizon` are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub lambda: f64,
    pub horizon: f64,
    pub init_points: Vec<f64>,
    pub ancestors: Vec<Ancestor>,
    pub initial_progeny: Vec<InitialProgeny>,
    /// All points sorted by time: initial points, their progeny and every cluster.
    pub events: Vec<Event>,
}

impl PathRecord {
    /// Assembles the sorted event list from the decomposition.
    pub fn assemble(
        lambda: f64,
        horizon: f64,
        init_points: Vec<f64>,
        ancestors: Vec<Ancestor>,
        initial_progeny: Vec<InitialProgeny>,
    ) -> Self {
        // (time, group, local index); groups are initial records first, then ancestors
        let mut raw: Vec<(f64, usize, usize)> = Vec::new();
        let groups: Vec<(f64, &Cluster, usize, Origin)> = initial_progeny
            .iter()
            .map(|p| (p.origin, &p.cluster, p.source, Origin::Initial))
            .chain(ancestors.iter().enumerate().map(|(i, a)| (a.arrival, &a.cluster, i, Origin::Immigrant)))
            .collect();
        for (g, (base, cluster, _, _)) in groups.iter().enumerate() {
            raw.extend(cluster.times.iter().enumerate().map(|(j, t)| (base + t, g, j)));
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut offsets = Vec::with_capacity(groups.len() + 1);
        offsets.push(0);
        for (_, c, _, _) in &groups {
            offsets.push(offsets.last().unwrap() + c.len());
        }
        let mut position = vec![0usize; raw.len()];
        for (global, &(_, g, j)) in raw.iter().enumerate() {
            position[offsets[g] + j] = global;
        }
        let events = raw
            .iter()
            .map(|&(time, g, j)| {
                let (_, cluster, id, origin) = groups[g];
                Event {
                    time,
                    cluster_id: id,
                    parent: cluster.parents[j].map(|p| position[offsets[g] + p]),
                    generation: cluster.generations[j],
                    origin,
                }
            })
            .collect();
        Self { lambda, horizon, init_points, ancestors, initial_progeny, events }
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }

    /// Total number of cluster points of the ancestors (including births after the horizon).
    pub fn descendant_count(&self) -> usize {
        self.ancestors.iter().map(|a| a.cluster.len()).sum()
    }

    /// Last point of `D₀` (initial points and their progeny), if any.
    pub fn initial_last_point(&self) -> Option<f64> {
        self.initial_progeny.iter().map(InitialProgeny::last_point).reduce(f64::max)
    }
}

fn check_rate(lambda: f64) -> Result<(), SimError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(SimError::InvalidInput(format!("lambda must be ≥ 0, got {lambda}")));
    }
    Ok(())
}

/// Simulates `N = D₀ + ψ(Γ)` with immigrants on `(0, T]`.
///
/// The immigrant count is Poisson(`λT`) and the arrival times are sorted
/// uniforms on `(0, T]`.
pub fn simulate_path<R: rand::Rng + ?Sized>(
    lambda: f64,
    h: &TransferFunction,
    init_points: &[f64],
    horizon: f64,
    rng: &mut R,
) -> Result<PathRecord, SimError> {
    check_rate(lambda)?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(SimError::InvalidInput(format!("horizon must be > 0, got {horizon}")));
    }
    h.check_subcritical()?;
    check_init_points(init_points)?;

    let initial_progeny = sample_initial_progeny(init_points, h, rng)?;
    let n = {
        let mean = lambda * horizon;
        if mean > 0.0 {
            use rand_distr::Distribution;
            rand_distr::Poisson::new(mean).expect("positive mean").sample(rng) as usize
        } else {
            0
        }
    };
    let mut arrivals: Vec<f64> = (0..n).map(|_| horizon * (1.0 - rng.random::<f64>())).collect();
    arrivals.sort_by(f64::total_cmp);
    let ancestors = arrivals
        .into_iter()
        .map(|arrival| Ok(Ancestor { arrival, cluster: sample_cluster(h, rng)? }))
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(PathRecord::assemble(lambda, horizon, init_points.to_vec(), ancestors, initial_progeny))
}

/// Simulates a null-start path up to its `n_cycles`-th A-regeneration time.
///
/// Immigrants are generated one exponential gap at a time and the path is
/// closed exactly at the end of the `n_cycles`-th busy period of the
/// M/G/∞ queue with service `L + A`, so `horizon = τ_{n_cycles}`.
pub fn simulate_cycles<R: rand::Rng + ?Sized>(
    lambda: f64,
    h: &TransferFunction,
    window: f64,
    n_cycles: usize,
    rng: &mut R,
) -> Result<PathRecord, SimError> {
    check_rate(lambda)?;
    if lambda == 0.0 {
        return Err(SimError::InvalidInput("cycle simulation needs lambda > 0".into()));
    }
    if !(window.is_finite() && window >= 0.0) {
        return Err(SimError::InvalidInput(format!("window must be ≥ 0, got {window}")));
    }
    if n_cycles == 0 {
        return Err(SimError::InvalidInput("n_cycles must be ≥ 1".into()));
    }
    h.check_subcritical()?;
    let mut ancestors = Vec::new();
    let mut t = 0.0;
    let mut busy_end = f64::NEG_INFINITY;
    let mut completed = 0;
    let horizon = loop {
        t += -(1.0 - rng.random::<f64>()).ln() / lambda;
        if t >= busy_end && !ancestors.is_empty() {
            completed += 1;
            if completed == n_cycles {
                break busy_end;
            }
        }
        let cluster = sample_cluster(h, rng)?;
        busy_end = busy_end.max(t + cluster.length + window);
        ancestors.push(Ancestor { arrival: t, cluster });
    };
    Ok(PathRecord::assemble(lambda, horizon, Vec::new(), ancestors, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream;

    fn exp_kernel() -> TransferFunction {
        TransferFunction::exponential(0.5, 1.0).unwrap()
    }

    #[test]
    fn zero_kernel_cluster_is_root() {
        let mut rng = stream(1, 0);
        let c = sample_cluster(&TransferFunction::Zero, &mut rng).unwrap();
        assert_eq!(c.times, vec![0.0]);
        assert_eq!(c.length, 0.0);
        assert!(c.is_valid_genealogy());
    }

    #[test]
    fn supercritical_rejected() {
        let mut rng = stream(1, 0);
        let h = TransferFunction::exponential(2.0, 1.0).unwrap();
        assert!(matches!(sample_cluster(&h, &mut rng), Err(SimError::Transfer(TransferError::NotSubcritical { .. }))));
    }

    #[test]
    fn sampled_clusters_have_valid_genealogy() {
        let mut rng = stream(5, 0);
        for _ in 0..2000 {
            let c = sample_cluster(&exp_kernel(), &mut rng).unwrap();
            assert!(c.is_valid_genealogy());
            for i in 1..c.len() {
                let p = c.parents[i].unwrap();
                assert_eq!(c.generations[i], c.generations[p] + 1);
            }
        }
    }

    #[test]
    fn size_cap_reports_partial_cluster() {
        // near critical, P(size > 1000) is a few percent per cluster
        let h = TransferFunction::exponential(0.999_999, 1.0).unwrap();
        let mut rng = stream(11, 0);
        let mut saw_cap = false;
        for _ in 0..2000 {
            if let Err(SimError::SizeCap { partial }) = grow(&h, None, 1000, &mut rng) {
                assert!(partial.len() > 1000);
                assert!(partial.is_valid_genealogy());
                saw_cap = true;
                break;
            }
        }
        assert!(saw_cap);
    }

    #[test]
    fn empty_inputs_give_empty_paths() {
        let mut rng = stream(2, 0);
        let p = simulate_path(0.0, &exp_kernel(), &[], 10.0, &mut rng).unwrap();
        assert!(p.events.is_empty());
        assert!(sample_initial_progeny(&[], &exp_kernel(), &mut rng).unwrap().is_empty());
    }

    #[test]
    fn initial_points_beyond_box_support_have_no_progeny() {
        let h = TransferFunction::uniform_box(0.3, 2.0).unwrap();
        let mut rng = stream(3, 0);
        for _ in 0..500 {
            let recs = sample_initial_progeny(&[-5.0, -3.0, -2.5], &h, &mut rng).unwrap();
            assert!(recs.iter().all(|r| r.cluster.len() == 1));
        }
    }

    #[test]
    fn bad_initial_points_rejected() {
        let mut rng = stream(3, 0);
        assert!(sample_initial_progeny(&[-1.0, 0.5], &exp_kernel(), &mut rng).is_err());
        assert!(sample_initial_progeny(&[-1.0, -2.0], &exp_kernel(), &mut rng).is_err());
    }

    #[test]
    fn path_events_are_the_decomposition() {
        let mut rng = stream(4, 0);
        let init = [-3.0, -1.0, -0.2];
        let p = simulate_path(1.0, &exp_kernel(), &init, 50.0, &mut rng).unwrap();
        let mut expected: Vec<f64> = p
            .ancestors
            .iter()
            .flat_map(|a| a.cluster.times.iter().map(move |t| a.arrival + t))
            .chain(p.initial_progeny.iter().flat_map(|r| r.cluster.times.iter().map(move |t| r.origin + t)))
            .collect();
        expected.sort_by(f64::total_cmp);
        assert_eq!(p.event_times(), expected);
        assert!(p.ancestors.iter().all(|a| a.arrival > 0.0 && a.arrival <= 50.0));
        for (i, e) in p.events.iter().enumerate() {
            if let Some(par) = e.parent {
                assert!(par < i);
                assert!(p.events[par].time < e.time);
                assert_eq!(p.events[par].generation + 1, e.generation);
                assert_eq!(p.events[par].cluster_id, e.cluster_id);
                assert_eq!(p.events[par].origin, e.origin);
            } else {
                assert_eq!(e.generation, 0);
            }
        }
        // initial points themselves appear as roots
        let roots: Vec<f64> = p.events.iter().filter(|e| e.origin == Origin::Initial && e.parent.is_none()).map(|e| e.time).collect();
        assert_eq!(roots, init.to_vec());
    }

    #[test]
    fn cycle_simulation_ends_on_regeneration() {
        let mut rng = stream(6, 0);
        let p = simulate_cycles(1.0, &exp_kernel(), 1.0, 25, &mut rng).unwrap();
        let report = crate::regen::regeneration_times(&p, 1.0).unwrap();
        assert_eq!(report.taus.len(), 25);
        assert_eq!(*report.taus.last().unwrap(), p.horizon);
        assert!(!report.incomplete_tail);
    }
}

//! Online stage: increment loop of the cluster-reduced model with optional
//! clustering adaptivity and solution rewinding.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::adaptivity::{
    adaptivity_step, inherit, perform_rewind, should_store_rewind, AdaptivityConfig, AdaptivityEvent,
    AdaptivityInput, RewindState, RewindTrigger,
};
use crate::cit::InteractionMatrix;
use crate::clustering::ClusterMap;
use crate::materials::{ClusterState, PhaseMaterial};
use crate::offline::{grid_voigt_reference, OfflineFeatures, OfflineModel};
use crate::oracle::FieldSnapshot;
use crate::solver::{
    check_fracture, compute_toughness, homogenize, run_self_consistent_increment, Control, FractureCriterion,
    LoadingPath, MacroConstraint, ReducedModel, ScIncrement, SolverConfig,
};
use crate::spectral::{ReferenceMaterial, VoxelGrid};
use crate::tensor::{Sym2, Sym2Ps};
use crate::{ClusterId, Error, PhaseId, Result};

#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct SimulationConfig {
    pub solver: SolverConfig,
    /// `None` runs static clustering.
    pub adaptivity: Option<AdaptivityConfig>,
    pub fracture: Option<FractureCriterion>,
    /// Increments (1-based) whose fields and labels are kept.
    pub checkpoints: Vec<usize>,
    /// Initial reference material; the Voigt average when `None`.
    pub reference: Option<ReferenceMaterial>,
    pub seed: u64,
}


/// Homogenized state after one increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementRecord {
    pub increment: usize,
    pub strain: Sym2,
    pub stress: Sym2Ps,
    pub n_clusters: usize,
    pub reference: ReferenceMaterial,
    pub fractured: bool,
    pub newton_iterations: usize,
    pub sc_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RunEvent {
    Adaptivity(AdaptivityEvent),
    /// Snapshot taken at the start of the increment following `increment`.
    RewindStored { increment: usize },
    Rewind { from_increment: usize, to_increment: usize, n_clusters: usize },
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub history: Vec<IncrementRecord>,
    pub checkpoints: BTreeMap<usize, FieldSnapshot>,
    pub cluster_labels: BTreeMap<usize, Vec<ClusterId>>,
    pub events: Vec<RunEvent>,
    /// First fractured increment (1-based).
    pub fracture_increment: Option<usize>,
    /// Area under the homogenized σ11-ε11 curve up to fracture.
    pub toughness: f64,
    pub map: ClusterMap,
    /// Final cluster states in `map.ids()` order.
    pub states: Vec<ClusterState>,
    pub cit: InteractionMatrix,
}

/// Per-voxel fields of piecewise-uniform cluster states.
pub fn voxel_fields(map: &ClusterMap, states: &[ClusterState]) -> Result<FieldSnapshot> {
    let ids = map.ids();
    if ids.len() != states.len() {
        return Err(Error::ShapeMismatch { expected: ids.len(), actual: states.len() });
    }
    let index: BTreeMap<ClusterId, usize> = ids.iter().enumerate().map(|(k, id)| (*id, k)).collect();
    let per_voxel: Vec<ClusterState> = map.labels().iter().map(|id| states[index[id]]).collect();
    Ok(FieldSnapshot::from_states(&per_voxel))
}

fn initial_guess(constraint: &MacroConstraint, n: usize) -> Vec<Sym2> {
    let mut g = constraint.values;
    for (k, c) in constraint.control.iter().enumerate() {
        if *c == Control::Stress {
            g[k] = 0.0;
        }
    }
    vec![g; n]
}

struct Run<'a> {
    grid: &'a VoxelGrid,
    materials: &'a BTreeMap<PhaseId, PhaseMaterial>,
    features: &'a OfflineFeatures,
    ctx: &'a crate::cit::CitContext,
    cfg: &'a SimulationConfig,
}

impl Run<'_> {
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        map: &ClusterMap,
        cit: &InteractionMatrix,
        states_n: &[ClusterState],
        guess: &[Sym2],
        constraint: &MacroConstraint,
        reference: &ReferenceMaterial,
        increment: usize,
    ) -> Result<ScIncrement> {
        let model = ReducedModel::new(map, cit, self.materials)?;
        run_self_consistent_increment(&model, states_n, guess, constraint, reference, &self.cfg.solver).map_err(|e| {
            Error::IncrementFailed { increment, cuts: self.cfg.solver.max_cuts, source: Box::new(e) }
        })
    }
}

/// Runs the loading path on the offline model.
pub fn run_simulation(
    grid: &VoxelGrid,
    materials: &BTreeMap<PhaseId, PhaseMaterial>,
    offline: OfflineModel,
    features: &OfflineFeatures,
    loading: &LoadingPath,
    cfg: &SimulationConfig,
) -> Result<SimulationResult> {
    cfg.solver.validate()?;
    if let Some(a) = &cfg.adaptivity {
        a.validate()?;
    }
    if let Some(f) = &cfg.fracture {
        f.validate()?;
    }
    let OfflineModel { mut map, mut cit, ctx } = offline;
    let run = Run { grid, materials, features, ctx: &ctx, cfg };
    let input = AdaptivityInput {
        grid: run.grid,
        features: &run.features.dataset,
        h_norm: Some(&run.features.h_norm),
        cit: run.ctx,
        seed: cfg.seed,
    };
    let mut reference = match cfg.reference {
        Some(r) => r,
        None => grid_voigt_reference(grid, materials)?,
    };
    let n_inc = loading.len();
    let mut states = vec![ClusterState::default(); map.n_clusters()];
    let mut guess: Option<Vec<Sym2>> = None;
    let mut history: Vec<IncrementRecord> = Vec::with_capacity(n_inc);
    let mut checkpoints = BTreeMap::new();
    let mut cluster_labels = BTreeMap::new();
    let mut events = Vec::new();
    let mut fracture_increment = None;
    let mut snapshot: Option<RewindState> = None;
    let mut rewound = false;
    let rewind_enabled = cfg.adaptivity.as_ref().is_some_and(|a| a.rewind);
    let trigger = cfg.adaptivity.as_ref().map_or(RewindTrigger::FirstPlastic, |a| a.rewind_trigger);
    let mut m = 0;
    while m < n_inc {
        let inc = m + 1;
        let constraint = &loading.increments[m];
        let mut states_n = states.clone();
        let mut g = guess.clone().unwrap_or_else(|| initial_guess(constraint, map.n_clusters()));
        let start = (rewind_enabled && snapshot.is_none())
            .then(|| (states_n.clone(), g.clone(), map.clone(), reference));
        let mut sc = run.solve(&map, &cit, &states_n, &g, constraint, &reference, inc)?;
        let mut adapted = false;
        if let Some(acfg) = &cfg.adaptivity {
            let mut step = 0;
            while let Some(outcome) = adaptivity_step(input, acfg, &map, &cit, &sc.solution.states, inc, step)? {
                step += 1;
                events.push(RunEvent::Adaptivity(outcome.event));
                let Some((new_map, new_cit)) = outcome.update else { break };
                adapted = true;
                let old_ids = map.ids();
                let deltas: Vec<Sym2> = sc.solution.states.iter().map(|s| s.delta_strain).collect();
                if acfg.repeat_increment {
                    states_n = inherit(&old_ids, &states_n, &new_map)?;
                    g = inherit(&old_ids, &deltas, &new_map)?;
                    map = new_map;
                    cit = new_cit;
                    sc = run.solve(&map, &cit, &states_n, &g, constraint, &reference, inc)?;
                } else {
                    sc.solution.states = inherit(&old_ids, &sc.solution.states, &new_map)?;
                    map = new_map;
                    cit = new_cit;
                    break;
                }
            }
        }
        states = sc.solution.states;
        reference = sc.reference;
        guess = Some(states.iter().map(|s| s.delta_strain).collect());
        let h = homogenize(&states, &map.fractions())?;
        let fractured = match &cfg.fracture {
            Some(f) => check_fracture(&states, &map, f)?,
            None => false,
        };
        if fractured && fracture_increment.is_none() {
            fracture_increment = Some(inc);
        }
        history.push(IncrementRecord {
            increment: inc,
            strain: h.strain,
            stress: h.stress,
            n_clusters: map.n_clusters(),
            reference,
            fractured,
            newton_iterations: sc.newton_iterations,
            sc_iterations: sc.sc_iterations,
        });
        if cfg.checkpoints.contains(&inc) {
            checkpoints.insert(inc, voxel_fields(&map, &states)?);
            cluster_labels.insert(inc, map.labels().to_vec());
        }
        if let Some((s0, g0, map0, ref0)) = start {
            if trigger == RewindTrigger::Start || should_store_rewind(&states) {
                snapshot = Some(RewindState::new(m, s0, g0, map0, ref0, m)?);
                events.push(RunEvent::RewindStored { increment: m });
            }
        }
        if adapted && rewind_enabled && !rewound {
            if let Some(snap) = &snapshot {
                let (s, g) = perform_rewind(snap, &map)?;
                states = s;
                guess = Some(g);
                reference = snap.reference;
                history.truncate(snap.history_len);
                checkpoints.retain(|k, _| *k <= snap.increment);
                cluster_labels.retain(|k, _| *k <= snap.increment);
                if fracture_increment.is_some_and(|f| f > snap.increment) {
                    fracture_increment = None;
                }
                events.push(RunEvent::Rewind { from_increment: inc, to_increment: snap.increment, n_clusters: map.n_clusters() });
                rewound = true;
                m = snap.increment;
                continue;
            }
        }
        m += 1;
    }
    let points: Vec<(f64, f64)> = history.iter().map(|r| (r.strain[0], r.stress[0])).collect();
    let toughness = compute_toughness(&points, fracture_increment);
    Ok(SimulationResult { history, checkpoints, cluster_labels, events, fracture_increment, toughness, map, states, cit })
}

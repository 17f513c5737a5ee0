use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{evaluate_trace, mutate, Evaluation, Individual, TesterConfig, TesterKind};
use crate::canon;
use crate::network::RoadNetwork;
use crate::scenario::{validate_scenario, Scenario, VehicleModelCatalog};
use crate::sim::Trace;

const REPORT_PRETTY_DEPTH: usize = 3;

/// Runs a batch of scenarios and returns one trace per scenario, in order.
pub trait BatchExecutor {
    fn execute(&mut self, scenarios: &[Scenario]) -> Result<Vec<Trace>, String>;
}

/// Hook called after every generation has been executed and evaluated.
pub trait SearchObserver {
    fn on_generation(
        &mut self,
        _executed: &[(&Individual, &Trace, &Evaluation)],
        _summary: &GenerationSummary,
    ) -> Result<(), String> {
        Ok(())
    }
}

pub struct NoopObserver;

impl SearchObserver for NoopObserver {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualRecord {
    pub individual_id: String,
    pub parent_id: Option<String>,
    pub generation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: usize,
    /// Population ids, elites carried over from earlier generations included.
    pub members: Vec<String>,
    pub executed: usize,
    pub best_fitness: f64,
    pub best_individual: String,
    pub best_so_far: f64,
    /// Newly executed individuals with at least one violated oracle.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed_id: String,
    pub tester: TesterKind,
    pub rng_seed: u64,
    pub individuals: Vec<IndividualRecord>,
    pub evaluations: Vec<Evaluation>,
    pub generations: Vec<GenerationSummary>,
    pub violating: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl RunReport {
    pub fn to_canonical(&self) -> String {
        canon::to_canonical_string(self, REPORT_PRETTY_DEPTH)
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        self.generations.iter().map(|g| g.best_so_far).collect()
    }

    pub fn executions(&self) -> usize {
        self.evaluations.len()
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid tester config: {0}")]
    Config(String),
    #[error("seed scenario is invalid: {0}")]
    InvalidSeed(String),
    #[error("run aborted: {message}")]
    Aborted { message: String, report: Box<RunReport> },
}

/// Independent random stream for one (generation, slot) of a run.
pub fn individual_rng(rng_seed: u64, generation: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(((generation as u64) << 32) | slot as u64);
    rng
}

fn rank_key(e: &Evaluation) -> (f64, &str) {
    (e.fitness, e.individual_id.as_str())
}

fn better(a: &Evaluation, b: &Evaluation) -> bool {
    let (fa, ia) = rank_key(a);
    let (fb, ib) = rank_key(b);
    fa < fb || (fa == fb && ia < ib)
}

/// Index of the winner among `k` distinct members drawn uniformly.
pub fn tournament<R: rand::Rng + ?Sized>(evals: &[Evaluation], k: usize, rng: &mut R) -> usize {
    let k = k.min(evals.len()).max(1);
    sample(rng, evals.len(), k)
        .into_iter()
        .reduce(|a, b| if better(&evals[b], &evals[a]) { b } else { a })
        .expect("k >= 1")
}

/// Parents for the next generation, as indices into `evals`: the `elites`
/// best first (ties by id), then `n - elites` tournament winners.
pub fn select<R: rand::Rng + ?Sized>(
    evals: &[Evaluation],
    n: usize,
    elites: usize,
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut out = elite_indices(evals, elites.min(n));
    while out.len() < n {
        out.push(tournament(evals, k, rng));
    }
    out
}

fn elite_indices(evals: &[Evaluation], e: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..evals.len()).collect();
    order.sort_by(|&a, &b| {
        evals[a]
            .fitness
            .total_cmp(&evals[b].fitness)
            .then_with(|| evals[a].individual_id.cmp(&evals[b].individual_id))
    });
    order.truncate(e);
    order
}

struct Member {
    individual: Individual,
    evaluation: Option<Evaluation>,
}

#[allow(clippy::too_many_arguments)]
fn offspring(
    parent: &Scenario,
    parent_id: &str,
    generation: usize,
    slot: usize,
    tcfg: &TesterConfig,
    net: &RoadNetwork,
    catalog: &VehicleModelCatalog,
    rng: &mut ChaCha8Rng,
) -> Member {
    let id = format!("g{generation}_i{slot}");
    let mut scenario = mutate(parent, &tcfg.mutation, net, catalog, rng);
    scenario.scenario_id = id.clone();
    Member {
        individual: Individual {
            individual_id: id,
            scenario,
            parent_id: Some(parent_id.to_string()),
            generation,
        },
        evaluation: None,
    }
}

/// Evolutionary search from `seed`. Generation 0 holds N mutations of the
/// seed. Each generation runs its new members through `executor`, applies the
/// oracles and fitness, then forms the next population. Elites carry over
/// with their evaluation and are not executed again.
pub fn run_search(
    seed: &Scenario,
    tcfg: &TesterConfig,
    executor: &mut dyn BatchExecutor,
    observer: &mut dyn SearchObserver,
    net: &RoadNetwork,
    catalog: &VehicleModelCatalog,
) -> Result<RunReport, SearchError> {
    tcfg.check().map_err(SearchError::Config)?;
    let check = validate_scenario(seed, net, catalog);
    if let Some(f) = check.errors().next() {
        return Err(SearchError::InvalidSeed(format!("{}: {}", f.path, f.message)));
    }
    let seed = seed.normalized();
    let n = tcfg.population_size;
    let mut report = RunReport {
        seed_id: seed.scenario_id.clone(),
        tester: tcfg.kind,
        rng_seed: tcfg.rng_seed,
        individuals: Vec::new(),
        evaluations: Vec::new(),
        generations: Vec::new(),
        violating: Vec::new(),
        aborted: None,
    };
    let from_seed = |g: usize| -> Vec<Member> {
        (0..n)
            .map(|slot| {
                let mut rng = individual_rng(tcfg.rng_seed, g, slot);
                offspring(&seed, &seed.scenario_id, g, slot, tcfg, net, catalog, &mut rng)
            })
            .collect()
    };
    let mut population = from_seed(0);
    let mut best_so_far = f64::INFINITY;

    for g in 0..tcfg.generations {
        let pending: Vec<usize> = (0..n).filter(|&i| population[i].evaluation.is_none()).collect();
        let scenarios: Vec<Scenario> = pending
            .iter()
            .map(|&i| population[i].individual.scenario.clone())
            .collect();
        let traces = match executor.execute(&scenarios) {
            Ok(t) if t.len() == scenarios.len() => t,
            Ok(t) => {
                let message = format!("executor returned {} traces for {} scenarios", t.len(), scenarios.len());
                report.aborted = Some(message.clone());
                return Err(SearchError::Aborted {
                    message,
                    report: Box::new(report),
                });
            }
            Err(message) => {
                report.aborted = Some(message.clone());
                return Err(SearchError::Aborted {
                    message,
                    report: Box::new(report),
                });
            }
        };
        let mut violations = 0;
        for (&i, trace) in pending.iter().zip(&traces) {
            let ind = &population[i].individual;
            let trace_ref = format!("gen_{g}/ind_{i}/trace.json");
            let eval = evaluate_trace(trace, &ind.individual_id, g, trace_ref, tcfg);
            if eval.violated() {
                violations += 1;
                report.violating.push(ind.individual_id.clone());
            }
            report.individuals.push(IndividualRecord {
                individual_id: ind.individual_id.clone(),
                parent_id: ind.parent_id.clone(),
                generation: g,
            });
            report.evaluations.push(eval.clone());
            population[i].evaluation = Some(eval);
        }
        let evals: Vec<Evaluation> = population
            .iter()
            .map(|m| m.evaluation.clone().expect("evaluated"))
            .collect();
        let best = (0..n)
            .reduce(|a, b| if better(&evals[b], &evals[a]) { b } else { a })
            .expect("n >= 1");
        best_so_far = best_so_far.min(evals[best].fitness);
        let summary = GenerationSummary {
            generation: g,
            members: evals.iter().map(|e| e.individual_id.clone()).collect(),
            executed: pending.len(),
            best_fitness: evals[best].fitness,
            best_individual: evals[best].individual_id.clone(),
            best_so_far,
            violations,
        };
        let executed: Vec<(&Individual, &Trace, &Evaluation)> = pending
            .iter()
            .zip(&traces)
            .map(|(&i, t)| {
                (
                    &population[i].individual,
                    t,
                    population[i].evaluation.as_ref().expect("evaluated"),
                )
            })
            .collect();
        if let Err(message) = observer.on_generation(&executed, &summary) {
            report.generations.push(summary);
            report.aborted = Some(message.clone());
            return Err(SearchError::Aborted {
                message,
                report: Box::new(report),
            });
        }
        report.generations.push(summary);

        if (tcfg.stop_on_first_violation && violations > 0) || g + 1 == tcfg.generations {
            break;
        }
        population = match tcfg.kind {
            TesterKind::Random => from_seed(g + 1),
            TesterKind::Genetic => {
                let mut next: Vec<Member> = elite_indices(&evals, tcfg.elite_count)
                    .into_iter()
                    .map(|i| Member {
                        individual: population[i].individual.clone(),
                        evaluation: population[i].evaluation.clone(),
                    })
                    .collect();
                for slot in next.len()..n {
                    let mut rng = individual_rng(tcfg.rng_seed, g + 1, slot);
                    let p = tournament(&evals, tcfg.tournament_size, &mut rng);
                    let parent = &population[p].individual;
                    next.push(offspring(
                        &parent.scenario,
                        &parent.individual_id,
                        g + 1,
                        slot,
                        tcfg,
                        net,
                        catalog,
                        &mut rng,
                    ));
                }
                next
            }
        };
    }
    Ok(report)
}

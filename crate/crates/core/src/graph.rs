//! Factor graphs, the message store and the damped EP loop.
//!
//! Only factor→node messages are stored. A node→factor message is the sum of
//! the natural parameters of every other factor→node message at that node.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expfam::{FamilyTag, NatParam};
use crate::fragments::FragmentData;
use crate::quadrature::QuadConfig;
use crate::scalar::Real;

pub type NodeId = usize;
pub type FactorId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticNode {
    pub name: String,
    pub family: FamilyTag,
    /// Messages from non-prior factors into a fixed node stay at zero, so its
    /// posterior is the product of its prior factors alone.
    pub fixed: bool,
}

impl StochasticNode {
    pub fn dim(&self) -> usize {
        self.family.dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorNode<T> {
    pub name: String,
    pub fragment: FragmentData<T>,
    pub neighbors: Vec<NodeId>,
}

#[derive(Clone, Debug, Default)]
pub struct FactorGraph<T> {
    nodes: Vec<StochasticNode>,
    factors: Vec<FactorNode<T>>,
    /// For each node, the (factor, slot) pairs of its incident edges.
    incidence: Vec<Vec<(FactorId, usize)>>,
}

/// Factor→node messages indexed by `[factor][slot]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageStore<T> {
    msgs: Vec<Vec<NatParam<T>>>,
}

impl<T: Real> MessageStore<T> {
    pub fn get(&self, factor: FactorId, slot: usize) -> &NatParam<T> {
        &self.msgs[factor][slot]
    }

    pub fn factor(&self, factor: FactorId) -> &[NatParam<T>] {
        &self.msgs[factor]
    }

    pub fn set_factor(&mut self, factor: FactorId, out: Vec<NatParam<T>>) -> Result<()> {
        let cur = &self.msgs[factor];
        if cur.len() != out.len() || cur.iter().zip(&out).any(|(a, b)| a.family != b.family) {
            return Err(Error::Contract(format!(
                "messages written to factor {factor} do not match its signature"
            )));
        }
        self.msgs[factor] = out;
        Ok(())
    }

    /// Largest ∞-norm change over all edges.
    pub fn max_change(&self, other: &Self) -> T {
        self.msgs
            .iter()
            .flatten()
            .zip(other.msgs.iter().flatten())
            .fold(T::zero(), |m, (a, b)| m.max(a.max_abs_diff(b)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// Factors in insertion order, each reading the latest messages.
    DeterministicSequential,
    /// All factors read a snapshot taken at the start of the sweep.
    ParallelSweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailurePolicy {
    Abort,
    KeepOldMessage,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpConfig<T> {
    pub epsilon: T,
    pub max_iterations: usize,
    pub tol: T,
    pub schedule: Schedule,
    pub on_update_failure: FailurePolicy,
    pub quad: QuadConfig<T>,
}

impl<T: Real> Default for EpConfig<T> {
    fn default() -> Self {
        EpConfig {
            epsilon: T::lit(0.1),
            max_iterations: 1000,
            tol: T::lit(1e-8),
            schedule: Schedule::DeterministicSequential,
            on_update_failure: FailurePolicy::KeepOldMessage,
            quad: QuadConfig::default(),
        }
    }
}

impl<T: Real> EpConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= T::zero() && self.epsilon < T::one()) {
            return Err(Error::Contract(format!("epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::Contract(format!("tol must be positive, got {}", self.tol)));
        }
        self.quad.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepStats<T> {
    pub max_change: T,
    pub failures: usize,
}

#[derive(Clone, Debug)]
pub struct FitResult<T> {
    /// Posterior natural parameters, indexed by node id.
    pub posteriors: Vec<NatParam<T>>,
    pub converged: bool,
    pub iterations_used: usize,
    pub max_change_trace: Vec<T>,
    pub failure_count: usize,
    pub messages: MessageStore<T>,
}

/// Weak proper starting message for a family.
pub fn weak_message<T: Real>(family: FamilyTag) -> NatParam<T> {
    let mut p = NatParam::zeros(family);
    match family {
        FamilyTag::UnivariateNormal => p.eta[1] = T::lit(-0.005),
        FamilyTag::MultivariateNormal(d) => {
            for i in 0..d {
                p.eta[d + i * d + i] = T::lit(-0.005);
            }
        }
        FamilyTag::InverseChiSquared => {
            p.eta[0] = T::lit(-1.5);
            p.eta[1] = T::lit(-0.5);
        }
        FamilyTag::InverseWishart(d) => {
            // κ = d, Λ = I.
            p.eta[0] = T::lit(-(2.0 * d as f64 + 1.0) / 2.0);
            for i in 0..d {
                p.eta[1 + i * d + i] = T::lit(-0.5);
            }
        }
        FamilyTag::MoonRock => {
            p.eta[0] = T::zero();
            p.eta[1] = T::lit(-1.0);
        }
    }
    p
}

impl<T: Real> FactorGraph<T> {
    pub fn new() -> Self {
        FactorGraph {
            nodes: Vec::new(),
            factors: Vec::new(),
            incidence: Vec::new(),
        }
    }

    pub fn add_node(&mut self, name: impl Into<String>, family: FamilyTag) -> Result<NodeId> {
        let name = name.into();
        if !family.is_valid() {
            return Err(Error::Contract(format!("node {name}: invalid family {family:?}")));
        }
        if self.nodes.iter().any(|n| n.name == name) {
            return Err(Error::Contract(format!("duplicate node name {name}")));
        }
        self.nodes.push(StochasticNode {
            name,
            family,
            fixed: false,
        });
        self.incidence.push(Vec::new());
        Ok(self.nodes.len() - 1)
    }

    pub fn add_factor(
        &mut self,
        name: impl Into<String>,
        fragment: FragmentData<T>,
        neighbors: &[NodeId],
    ) -> Result<FactorId> {
        let name = name.into();
        fragment.validate()?;
        let sig = fragment.signature();
        if sig.len() != neighbors.len() {
            return Err(Error::Contract(format!(
                "factor {name} ({}) needs {} neighbours, got {}",
                fragment.kind(),
                sig.len(),
                neighbors.len()
            )));
        }
        for (slot, (&n, fam)) in neighbors.iter().zip(&sig).enumerate() {
            let node = self
                .nodes
                .get(n)
                .ok_or_else(|| Error::Contract(format!("factor {name}: unknown node id {n}")))?;
            if node.family != *fam {
                return Err(Error::Contract(format!(
                    "factor {name} ({}) slot {slot} needs {fam:?} but node {} is {:?}",
                    fragment.kind(),
                    node.name,
                    node.family
                )));
            }
            if neighbors[..slot].contains(&n) {
                return Err(Error::Contract(format!("factor {name} lists node {} twice", node.name)));
            }
        }
        let id = self.factors.len();
        for (slot, &n) in neighbors.iter().enumerate() {
            self.incidence[n].push((id, slot));
        }
        self.factors.push(FactorNode {
            name,
            fragment,
            neighbors: neighbors.to_vec(),
        });
        Ok(id)
    }

    /// Holds a node at its prior; see [`StochasticNode::fixed`].
    pub fn fix_node(&mut self, node: NodeId) -> Result<()> {
        let n = self
            .nodes
            .get_mut(node)
            .ok_or_else(|| Error::Contract(format!("unknown node id {node}")))?;
        n.fixed = true;
        Ok(())
    }

    pub fn nodes(&self) -> &[StochasticNode] {
        &self.nodes
    }

    pub fn factors(&self) -> &[FactorNode<T>] {
        &self.factors
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Incident (factor, slot) pairs of a node.
    pub fn incidence(&self, node: NodeId) -> &[(FactorId, usize)] {
        &self.incidence[node]
    }

    /// Prior fragments receive their exact messages, every other edge a weak
    /// proper member of the node's family.
    pub fn initialize(&self) -> Result<MessageStore<T>> {
        let cfg = QuadConfig::default();
        let msgs = self
            .factors
            .iter()
            .map(|f| {
                if f.fragment.is_prior() {
                    f.fragment.compute(&[], &cfg)
                } else {
                    Ok(f.neighbors
                        .iter()
                        .map(|&n| {
                            let node = &self.nodes[n];
                            if node.fixed {
                                NatParam::zeros(node.family)
                            } else {
                                weak_message(node.family)
                            }
                        })
                        .collect())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MessageStore { msgs })
    }

    /// Natural parameters of the message from `node` to `factor`.
    pub fn stoch_to_factor(&self, store: &MessageStore<T>, node: NodeId, factor: FactorId) -> NatParam<T> {
        let mut acc = NatParam::zeros(self.nodes[node].family);
        for &(f, slot) in &self.incidence[node] {
            if f == factor {
                continue;
            }
            for (a, &b) in acc.eta.iter_mut().zip(&store.msgs[f][slot].eta) {
                *a += b;
            }
        }
        acc
    }

    /// Posterior natural parameters: the sum of all incident messages.
    pub fn posterior(&self, store: &MessageStore<T>, node: NodeId) -> NatParam<T> {
        self.stoch_to_factor(store, node, usize::MAX)
    }

    pub fn incoming(&self, store: &MessageStore<T>, factor: FactorId) -> Vec<NatParam<T>> {
        self.factors[factor]
            .neighbors
            .iter()
            .map(|&n| self.stoch_to_factor(store, n, factor))
            .collect()
    }

    /// Damped outgoing messages of one factor, read from `store`.
    pub fn factor_update(&self, store: &MessageStore<T>, factor: FactorId, eps: T, quad: &QuadConfig<T>) -> Result<Vec<NatParam<T>>> {
        let f = &self.factors[factor];
        let incoming = if f.fragment.is_prior() {
            Vec::new()
        } else {
            self.incoming(store, factor)
        };
        let mut out = f.fragment.update(&incoming, &store.msgs[factor], eps, quad)?;
        if !f.fragment.is_prior() {
            for (slot, &n) in f.neighbors.iter().enumerate() {
                if self.nodes[n].fixed {
                    out[slot] = store.msgs[factor][slot].clone();
                }
            }
        }
        Ok(out)
    }

    fn wrap(&self, factor: FactorId, iteration: usize, e: Error) -> Error {
        Error::Update {
            factor,
            name: self.factors[factor].name.clone(),
            kind: self.factors[factor].fragment.kind().to_string(),
            iteration,
            source: Box::new(e),
        }
    }

    /// One pass over all factors. `iteration` is only used in error reports.
    pub fn sweep(&self, store: &mut MessageStore<T>, cfg: &EpConfig<T>, iteration: usize) -> Result<SweepStats<T>> {
        let mut max_change = T::zero();
        let mut failures = 0;
        match cfg.schedule {
            Schedule::DeterministicSequential => {
                for f in 0..self.factors.len() {
                    match self.factor_update(store, f, cfg.epsilon, &cfg.quad) {
                        Ok(out) => {
                            for (o, n) in store.msgs[f].iter().zip(&out) {
                                max_change = max_change.max(o.max_abs_diff(n));
                            }
                            store.msgs[f] = out;
                        }
                        Err(e) => match cfg.on_update_failure {
                            FailurePolicy::Abort => return Err(self.wrap(f, iteration, e)),
                            FailurePolicy::KeepOldMessage => failures += 1,
                        },
                    }
                }
            }
            Schedule::ParallelSweep => {
                let snapshot = store.clone();
                let results: Vec<Result<Vec<NatParam<T>>>> = (0..self.factors.len())
                    .into_par_iter()
                    .map(|f| self.factor_update(&snapshot, f, cfg.epsilon, &cfg.quad))
                    .collect();
                for (f, r) in results.into_iter().enumerate() {
                    match r {
                        Ok(out) => {
                            for (o, n) in store.msgs[f].iter().zip(&out) {
                                max_change = max_change.max(o.max_abs_diff(n));
                            }
                            store.msgs[f] = out;
                        }
                        Err(e) => match cfg.on_update_failure {
                            FailurePolicy::Abort => return Err(self.wrap(f, iteration, e)),
                            FailurePolicy::KeepOldMessage => failures += 1,
                        },
                    }
                }
            }
        }
        Ok(SweepStats { max_change, failures })
    }

    /// Sweeps until the largest message change drops below `cfg.tol` or the
    /// iteration budget runs out.
    pub fn run(&self, cfg: &EpConfig<T>) -> Result<FitResult<T>> {
        cfg.validate()?;
        let mut store = self.initialize()?;
        let mut trace = Vec::new();
        let mut failure_count = 0;
        let mut converged = false;
        for it in 0..cfg.max_iterations {
            let stats = self.sweep(&mut store, cfg, it + 1)?;
            trace.push(stats.max_change);
            failure_count += stats.failures;
            if stats.max_change < cfg.tol {
                converged = true;
                break;
            }
        }
        let posteriors: Vec<NatParam<T>> = (0..self.nodes.len()).map(|n| self.posterior(&store, n)).collect();
        if converged {
            let bad: Vec<String> = posteriors
                .iter()
                .zip(&self.nodes)
                .filter(|(p, _)| !p.is_proper())
                .map(|(_, n)| n.name.clone())
                .collect();
            if !bad.is_empty() {
                return Err(Error::ImproperPosterior(bad));
            }
        }
        Ok(FitResult {
            posteriors,
            converged,
            iterations_used: trace.len(),
            max_change_trace: trace,
            failure_count,
            messages: store,
        })
    }
}

impl<T: Real> FitResult<T> {
    pub fn posterior<'a>(&'a self, graph: &FactorGraph<T>, name: &str) -> Option<&'a NatParam<T>> {
        graph.node_id(name).map(|id| &self.posteriors[id])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    #[test]
    fn stoch_to_factor_sums_other_messages() {
        let mut g = FactorGraph::<f64>::new();
        let x = g.add_node("x", FamilyTag::UnivariateNormal).unwrap();
        let f: Vec<FactorId> = (0..3)
            .map(|i| g.add_factor(format!("f{i}"), FragmentData::ProbitLik { y: true }, &[x]).unwrap())
            .collect();
        let mut store = g.initialize().unwrap();
        store.set_factor(f[1], vec![NatParam::normal(1.0, -1.0)]).unwrap();
        store.set_factor(f[2], vec![NatParam::normal(2.0, -2.0)]).unwrap();
        store.set_factor(f[0], vec![NatParam::normal(5.0, -5.0)]).unwrap();
        assert_eq!(g.stoch_to_factor(&store, x, f[0]).eta, vec![3.0, -3.0]);
        assert_eq!(g.posterior(&store, x).eta, vec![8.0, -8.0]);

        let mut single = FactorGraph::<f64>::new();
        let y = single.add_node("y", FamilyTag::UnivariateNormal).unwrap();
        let h = single.add_factor("h", FragmentData::ProbitLik { y: false }, &[y]).unwrap();
        let s = single.initialize().unwrap();
        assert_eq!(single.stoch_to_factor(&s, y, h).eta, vec![0.0, 0.0]);
    }

    #[test]
    fn add_factor_checks_families() {
        let mut g = FactorGraph::<f64>::new();
        let x = g.add_node("x", FamilyTag::UnivariateNormal).unwrap();
        assert!(matches!(
            g.add_factor("f", FragmentData::GaussianLik { y: 0.0 }, &[x, x]),
            Err(Error::Contract(_))
        ));
        assert!(g.add_node("x", FamilyTag::InverseChiSquared).is_err());
    }

    #[test]
    fn prior_only_graph() {
        let mut g = FactorGraph::<f64>::new();
        let b = g.add_node("b", FamilyTag::MultivariateNormal(2)).unwrap();
        let prior = FragmentData::GaussianPrior {
            mu: vec![1.0, -1.0],
            sigma: Mat::diag(&[2.0, 0.5]),
        };
        let f = g.add_factor("prior", prior, &[b]).unwrap();
        let mut store = g.initialize().unwrap();
        let cfg = EpConfig::default();
        let want = crate::fragments::gaussian_prior_update(&[1.0, -1.0], &Mat::diag(&[2.0, 0.5])).unwrap();
        assert_eq!(store.get(f, 0), &want);
        g.sweep(&mut store, &cfg, 1).unwrap();
        assert_eq!(store.get(f, 0), &want);
        assert_eq!(g.sweep(&mut store, &cfg, 2).unwrap().max_change, 0.0);
    }

    #[test]
    fn zero_iterations_is_not_converged() {
        let mut g = FactorGraph::<f64>::new();
        let x = g.add_node("x", FamilyTag::UnivariateNormal).unwrap();
        g.add_factor("f", FragmentData::ProbitLik { y: true }, &[x]).unwrap();
        let cfg = EpConfig {
            max_iterations: 0,
            ..EpConfig::default()
        };
        let fit = g.run(&cfg).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations_used, 0);
        assert_eq!(fit.posteriors[x], weak_message(FamilyTag::UnivariateNormal));
    }
}

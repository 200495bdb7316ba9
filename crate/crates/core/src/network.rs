//! Road network, link travel-time functions and O-D path enumeration.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, Real};

/// Default cap on the number of enumerated O-D paths.
pub const DEFAULT_MAX_PATHS: usize = 10_000;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("malformed network JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("link {link}: unknown cost function kind `{kind}`")]
    UnknownCostKind { link: i64, kind: String },
    #[error("link {link}: invalid cost parameters: {reason}")]
    BadCostParams { link: i64, reason: String },
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate link id {0}")]
    DuplicateLinkId(i64),
    #[error("link {0} is a self-loop")]
    SelfLoop(i64),
    #[error("origin and destination are the same node `{0}`")]
    SameOriginDestination(String),
    #[error("demand must be finite and non-negative, got {0}")]
    NegativeDemand(f64),
    #[error("subscriber demand {subscribers} must lie in [0, {total}]")]
    BadSubscriberDemand { subscribers: f64, total: f64 },
    #[error("destination is unreachable from origin")]
    Disconnected,
    #[error("flow must be non-negative, got {0}")]
    NegativeFlow(f64),
    #[error("more than {limit} origin-destination paths")]
    TooManyPaths { limit: usize },
    #[error("max_paths must be at least 1")]
    ZeroPathLimit,
}

/// Link travel time as a function of link flow. Times are in minutes.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkCostFn<T> {
    /// `t(q) = intercept + slope * q`
    Linear { intercept: T, slope: T },
    /// `t(q) = Σ_k coeffs[k] * q^k`
    Polynomial { coeffs: Vec<T> },
    /// `t(q) = free_flow * (1 + alpha * (q / capacity)^power)`
    Bpr { free_flow: T, capacity: T, alpha: T, power: T },
}

impl<T: Real> LinkCostFn<T> {
    pub fn linear(intercept: T, slope: T) -> Self {
        LinkCostFn::Linear { intercept, slope }
    }

    /// Builds a cost function from the `kind`/`params` pair of the network file.
    pub fn from_params(kind: &str, params: &[f64]) -> Result<Self, String> {
        if params.iter().any(|p| !p.is_finite()) {
            return Err("parameters must be finite".into());
        }
        match kind {
            "linear" => match params {
                [a0, a1] if *a0 >= 0.0 && *a1 >= 0.0 => Ok(Self::linear(lit(*a0), lit(*a1))),
                [_, _] => Err("linear intercept and slope must be >= 0".into()),
                _ => Err(format!("linear takes 2 parameters, got {}", params.len())),
            },
            "polynomial" => {
                if params.is_empty() {
                    Err("polynomial needs at least one coefficient".into())
                } else if params.iter().any(|c| *c < 0.0) {
                    Err("polynomial coefficients must be >= 0".into())
                } else {
                    Ok(LinkCostFn::Polynomial { coeffs: params.iter().map(|c| lit(*c)).collect() })
                }
            }
            "bpr" => match params {
                [t0, cap, alpha, power] => {
                    if *t0 <= 0.0 || *cap <= 0.0 {
                        Err("bpr free-flow time and capacity must be > 0".into())
                    } else if *alpha < 0.0 {
                        Err("bpr alpha must be >= 0".into())
                    } else if *power < 1.0 {
                        Err("bpr exponent must be >= 1".into())
                    } else {
                        Ok(LinkCostFn::Bpr {
                            free_flow: lit(*t0),
                            capacity: lit(*cap),
                            alpha: lit(*alpha),
                            power: lit(*power),
                        })
                    }
                }
                _ => Err(format!("bpr takes 4 parameters, got {}", params.len())),
            },
            other => Err(format!("unknown kind `{other}`")),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LinkCostFn::Linear { .. } => "linear",
            LinkCostFn::Polynomial { .. } => "polynomial",
            LinkCostFn::Bpr { .. } => "bpr",
        }
    }

    pub fn params(&self) -> Vec<T> {
        match self {
            LinkCostFn::Linear { intercept, slope } => vec![*intercept, *slope],
            LinkCostFn::Polynomial { coeffs } => coeffs.clone(),
            LinkCostFn::Bpr { free_flow, capacity, alpha, power } => vec![*free_flow, *capacity, *alpha, *power],
        }
    }

    /// Travel time `t(q)`. Callers guarantee `q >= 0`.
    pub fn time(&self, q: T) -> T {
        match self {
            LinkCostFn::Linear { intercept, slope } => *intercept + *slope * q,
            LinkCostFn::Polynomial { coeffs } => coeffs.iter().rev().fold(T::zero(), |acc, c| acc * q + *c),
            LinkCostFn::Bpr { free_flow, capacity, alpha, power } => {
                *free_flow * (T::one() + *alpha * (q / *capacity).powf(*power))
            }
        }
    }

    /// Derivative `t'(q)`.
    pub fn derivative(&self, q: T) -> T {
        match self {
            LinkCostFn::Linear { slope, .. } => *slope,
            LinkCostFn::Polynomial { coeffs } => {
                let mut acc = T::zero();
                for (k, c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * q + *c * lit::<T>(k as f64);
                }
                acc
            }
            LinkCostFn::Bpr { free_flow, capacity, alpha, power } => {
                if q <= T::zero() && *power > T::one() {
                    return T::zero();
                }
                *free_flow * *alpha * *power * (q / *capacity).powf(*power - T::one()) / *capacity
            }
        }
    }

    /// Marginal social cost `t(q) + q t'(q)`.
    pub fn marginal(&self, q: T) -> T {
        self.time(q) + q * self.derivative(q)
    }

    /// `∫_0^q t(s) ds`, the link's contribution to the Beckmann potential.
    pub fn integral(&self, q: T) -> T {
        match self {
            LinkCostFn::Linear { intercept, slope } => *intercept * q + *slope * q * q / lit(2.0),
            LinkCostFn::Polynomial { coeffs } => {
                let mut acc = T::zero();
                for (k, c) in coeffs.iter().enumerate().rev() {
                    acc = acc * q + *c / lit::<T>((k + 1) as f64);
                }
                acc * q
            }
            LinkCostFn::Bpr { free_flow, capacity, alpha, power } => {
                let p1 = *power + T::one();
                *free_flow * (q + *alpha * *capacity / p1 * (q / *capacity).powf(p1))
            }
        }
    }

    pub fn eval_cost(&self, q: T) -> Result<T, NetworkError> {
        check_flow(q)?;
        Ok(self.time(q))
    }

    pub fn eval_marginal(&self, q: T) -> Result<T, NetworkError> {
        check_flow(q)?;
        Ok(self.marginal(q))
    }
}

fn check_flow<T: Real>(q: T) -> Result<(), NetworkError> {
    if q < T::zero() || !q.is_finite() {
        return Err(NetworkError::NegativeFlow(q.to_f64_lossy()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link<T> {
    pub id: i64,
    /// Index into [`Network::nodes`].
    pub tail: usize,
    pub head: usize,
    pub cost: LinkCostFn<T>,
}

/// Directed network with a single O-D pair and fixed demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub nodes: Vec<String>,
    pub links: Vec<Link<T>>,
    pub origin: usize,
    pub destination: usize,
    /// Total O-D demand `d`.
    pub demand: T,
    /// Subscriber share of the demand, `0 <= d̃ <= d`.
    pub subscriber_demand: T,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCost {
    kind: String,
    params: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawLink {
    id: i64,
    from: String,
    to: String,
    cost: RawCost,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawDemand {
    origin: String,
    destination: String,
    total: f64,
    subscribers: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawNetwork {
    nodes: Vec<String>,
    links: Vec<RawLink>,
    demand: RawDemand,
}

impl<T: Real> Network<T> {
    /// Parses and validates a network file.
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let raw: RawNetwork = serde_json::from_str(text)?;

        let mut index = HashMap::new();
        for (i, name) in raw.nodes.iter().enumerate() {
            if index.insert(name.as_str(), i).is_some() {
                return Err(NetworkError::DuplicateNode(name.clone()));
            }
        }
        let node = |name: &str| index.get(name).copied().ok_or_else(|| NetworkError::UnknownNode(name.to_string()));

        let mut seen = HashSet::new();
        let mut links = Vec::with_capacity(raw.links.len());
        for l in &raw.links {
            if !seen.insert(l.id) {
                return Err(NetworkError::DuplicateLinkId(l.id));
            }
            let tail = node(&l.from)?;
            let head = node(&l.to)?;
            if tail == head {
                return Err(NetworkError::SelfLoop(l.id));
            }
            let cost = match l.cost.kind.as_str() {
                "linear" | "polynomial" | "bpr" => LinkCostFn::from_params(&l.cost.kind, &l.cost.params)
                    .map_err(|reason| NetworkError::BadCostParams { link: l.id, reason })?,
                other => return Err(NetworkError::UnknownCostKind { link: l.id, kind: other.to_string() }),
            };
            links.push(Link { id: l.id, tail, head, cost });
        }

        let d = &raw.demand;
        if !d.total.is_finite() || d.total < 0.0 {
            return Err(NetworkError::NegativeDemand(d.total));
        }
        if !d.subscribers.is_finite() || d.subscribers < 0.0 || d.subscribers > d.total {
            return Err(NetworkError::BadSubscriberDemand { subscribers: d.subscribers, total: d.total });
        }

        let net = Network {
            nodes: raw.nodes.clone(),
            links,
            origin: node(&d.origin)?,
            destination: node(&d.destination)?,
            demand: lit(d.total),
            subscriber_demand: lit(d.subscribers),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        let raw = RawNetwork {
            nodes: self.nodes.clone(),
            links: self
                .links
                .iter()
                .map(|l| RawLink {
                    id: l.id,
                    from: self.nodes[l.tail].clone(),
                    to: self.nodes[l.head].clone(),
                    cost: RawCost {
                        kind: l.cost.kind().to_string(),
                        params: l.cost.params().iter().map(|p| p.to_f64_lossy()).collect(),
                    },
                })
                .collect(),
            demand: RawDemand {
                origin: self.nodes[self.origin].clone(),
                destination: self.nodes[self.destination].clone(),
                total: self.demand.to_f64_lossy(),
                subscribers: self.subscriber_demand.to_f64_lossy(),
            },
        };
        serde_json::to_string_pretty(&raw).expect("network serializes")
    }

    /// Checks the structural invariants. [`Network::from_json`] calls this.
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.origin == self.destination {
            return Err(NetworkError::SameOriginDestination(self.nodes[self.origin].clone()));
        }
        if self.demand < T::zero() {
            return Err(NetworkError::NegativeDemand(self.demand.to_f64_lossy()));
        }
        if self.subscriber_demand < T::zero() || self.subscriber_demand > self.demand {
            return Err(NetworkError::BadSubscriberDemand {
                subscribers: self.subscriber_demand.to_f64_lossy(),
                total: self.demand.to_f64_lossy(),
            });
        }
        if !self.reachable() {
            return Err(NetworkError::Disconnected);
        }
        Ok(())
    }

    /// Outsider demand `d - d̃`.
    pub fn outsider_demand(&self) -> T {
        self.demand - self.subscriber_demand
    }

    pub fn link_ids(&self, path: &[usize]) -> Vec<i64> {
        path.iter().map(|&a| self.links[a].id).collect()
    }

    fn reachable(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.origin];
        seen[self.origin] = true;
        while let Some(n) = stack.pop() {
            if n == self.destination {
                return true;
            }
            for l in self.links.iter().filter(|l| l.tail == n) {
                if !seen[l.head] {
                    seen[l.head] = true;
                    stack.push(l.head);
                }
            }
        }
        false
    }

    /// Outgoing link indices per node, sorted by link id.
    fn out_links(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (a, l) in self.links.iter().enumerate() {
            out[l.tail].push(a);
        }
        for v in &mut out {
            v.sort_by_key(|&a| self.links[a].id);
        }
        out
    }
}

/// All simple O-D paths plus the link-path incidence matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSet {
    /// Each path is a sequence of link indices into [`Network::links`].
    pub paths: Vec<Vec<usize>>,
    /// `incidence[a][r]` is true when path `r` uses link `a`.
    pub incidence: Vec<Vec<bool>>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn uses(&self, link: usize, path: usize) -> bool {
        self.incidence[link][path]
    }

    /// Link flows `q_a = Σ_r δ_{a,r} f_r`.
    pub fn link_flows<T: Real>(&self, n_links: usize, path_flows: &[T]) -> Vec<T> {
        let mut q = vec![T::zero(); n_links];
        for (r, path) in self.paths.iter().enumerate() {
            for &a in path {
                q[a] = q[a] + path_flows[r];
            }
        }
        q
    }

    /// Path costs `Σ_a δ_{a,r} c_a` for per-link costs `c`.
    pub fn path_costs<T: Real>(&self, link_costs: &[T]) -> Vec<T> {
        self.paths.iter().map(|p| p.iter().fold(T::zero(), |acc, &a| acc + link_costs[a])).collect()
    }
}

/// Enumerates every simple origin-destination path by depth-first search.
///
/// Outgoing links are explored in ascending id order, so paths come out
/// lexicographically ordered by their link-id sequence.
pub fn enumerate_paths<T: Real>(net: &Network<T>, max_paths: usize) -> Result<PathSet, NetworkError> {
    if max_paths == 0 {
        return Err(NetworkError::ZeroPathLimit);
    }
    let out = net.out_links();
    let mut paths = Vec::new();
    let mut on_path = vec![false; net.nodes.len()];
    let mut current = Vec::new();
    on_path[net.origin] = true;
    dfs(net, &out, net.origin, &mut on_path, &mut current, &mut paths, max_paths)?;
    if paths.is_empty() {
        return Err(NetworkError::Disconnected);
    }
    let mut incidence = vec![vec![false; paths.len()]; net.links.len()];
    for (r, p) in paths.iter().enumerate() {
        for &a in p {
            incidence[a][r] = true;
        }
    }
    Ok(PathSet { paths, incidence })
}

fn dfs<T: Real>(
    net: &Network<T>,
    out: &[Vec<usize>],
    node: usize,
    on_path: &mut [bool],
    current: &mut Vec<usize>,
    paths: &mut Vec<Vec<usize>>,
    limit: usize,
) -> Result<(), NetworkError> {
    if node == net.destination {
        if paths.len() == limit {
            return Err(NetworkError::TooManyPaths { limit });
        }
        paths.push(current.clone());
        return Ok(());
    }
    for &a in &out[node] {
        let next = net.links[a].head;
        if on_path[next] {
            continue;
        }
        on_path[next] = true;
        current.push(a);
        let res = dfs(net, out, next, on_path, current, paths, limit);
        current.pop();
        on_path[next] = false;
        res?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(a: f64, b: f64) -> LinkCostFn<f64> {
        LinkCostFn::linear(a, b)
    }

    const CHAIN: &str = r#"{
        "nodes": ["a", "b", "c", "d"],
        "links": [
            {"id": 1, "from": "a", "to": "b", "cost": {"kind": "linear", "params": [1, 0.1]}},
            {"id": 2, "from": "b", "to": "c", "cost": {"kind": "bpr", "params": [2, 100, 0.15, 4]}},
            {"id": 3, "from": "c", "to": "d", "cost": {"kind": "polynomial", "params": [1, 0, 0.001]}}
        ],
        "demand": {"origin": "a", "destination": "d", "total": 0, "subscribers": 0}
    }"#;

    #[test]
    fn linear_cost_values() {
        assert_eq!(lin(10.0, 0.05).eval_cost(250.0).unwrap(), 22.5);
        let f = lin(5.0, 0.02);
        assert_eq!(f.eval_cost(750.0).unwrap(), 20.0);
        assert_eq!(f.eval_marginal(750.0).unwrap(), 35.0);
    }

    #[test]
    fn zero_flow_marginal_equals_cost() {
        let fns = [
            lin(3.0, 0.5),
            LinkCostFn::Polynomial { coeffs: vec![2.0, 1.0, 3.0] },
            LinkCostFn::Bpr { free_flow: 4.0, capacity: 50.0, alpha: 0.15, power: 4.0 },
        ];
        let free = [3.0, 2.0, 4.0];
        for (f, t0) in fns.iter().zip(free) {
            assert_eq!(f.eval_cost(0.0).unwrap(), t0);
            assert_eq!(f.eval_marginal(0.0).unwrap(), t0);
            assert_eq!(f.integral(0.0), 0.0);
        }
    }

    #[test]
    fn negative_flow_rejected() {
        assert!(matches!(lin(1.0, 1.0).eval_cost(-1.0), Err(NetworkError::NegativeFlow(_))));
        assert!(lin(1.0, 1.0).eval_marginal(-0.5).is_err());
    }

    #[test]
    fn integral_matches_quadrature() {
        let f: LinkCostFn<f64> = LinkCostFn::Bpr { free_flow: 4.0, capacity: 50.0, alpha: 0.15, power: 4.0 };
        let q = 80.0;
        let n = 100_000;
        let h = q / n as f64;
        let trap: f64 = (0..n).map(|i| 0.5 * h * (f.time(i as f64 * h) + f.time((i + 1) as f64 * h))).sum();
        assert!((trap - f.integral(q)).abs() < 1e-6 * trap);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(LinkCostFn::<f64>::from_params("linear", &[1.0]).is_err());
        assert!(LinkCostFn::<f64>::from_params("linear", &[-1.0, 1.0]).is_err());
        assert!(LinkCostFn::<f64>::from_params("bpr", &[1.0, 0.0, 0.15, 4.0]).is_err());
        assert!(LinkCostFn::<f64>::from_params("bpr", &[1.0, 10.0, 0.15, 0.5]).is_err());
        assert!(LinkCostFn::<f64>::from_params("polynomial", &[]).is_err());
    }

    #[test]
    fn parse_chain_with_zero_demand() {
        let net: Network<f64> = Network::from_json(CHAIN).unwrap();
        assert_eq!(net.links.len(), 3);
        assert_eq!(net.demand, 0.0);
        let ps = enumerate_paths(&net, DEFAULT_MAX_PATHS).unwrap();
        assert_eq!(ps.paths, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn json_round_trip() {
        let net: Network<f64> = Network::from_json(CHAIN).unwrap();
        let again: Network<f64> = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn parse_errors() {
        let same = CHAIN.replace(r#""destination": "d""#, r#""destination": "a""#);
        assert!(matches!(Network::<f64>::from_json(&same), Err(NetworkError::SameOriginDestination(_))));

        let dup = CHAIN.replace(r#""id": 3"#, r#""id": 2"#);
        assert!(matches!(Network::<f64>::from_json(&dup), Err(NetworkError::DuplicateLinkId(2))));

        let kind = CHAIN.replace("polynomial", "cubic");
        assert!(matches!(Network::<f64>::from_json(&kind), Err(NetworkError::UnknownCostKind { .. })));

        let neg = CHAIN.replace(r#""total": 0"#, r#""total": -5"#);
        assert!(matches!(Network::<f64>::from_json(&neg), Err(NetworkError::NegativeDemand(_))));

        let over = CHAIN.replace(r#""subscribers": 0"#, r#""subscribers": 1"#);
        assert!(matches!(Network::<f64>::from_json(&over), Err(NetworkError::BadSubscriberDemand { .. })));

        let cut = CHAIN.replace(r#""from": "c", "to": "d""#, r#""from": "d", "to": "c""#);
        assert!(matches!(Network::<f64>::from_json(&cut), Err(NetworkError::Disconnected)));

        assert!(matches!(Network::<f64>::from_json("{"), Err(NetworkError::Json(_))));
    }

    #[test]
    fn path_limit_and_zero_limit() {
        let net: Network<f64> = Network::from_json(CHAIN).unwrap();
        assert!(matches!(enumerate_paths(&net, 0), Err(NetworkError::ZeroPathLimit)));
        assert!(enumerate_paths(&net, 1).is_ok());
    }
}

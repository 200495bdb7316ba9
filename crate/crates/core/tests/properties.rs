use num_rational::BigRational;
use proptest::prelude::*;

use ubcs_core::equilibrium::{FlowSolution, SolverOptions};
use ubcs_core::lp::StandardLp;
use ubcs_core::network::{Link, LinkCostFn, Network, PathSet, DEFAULT_MAX_PATHS};
use ubcs_core::pipeline::{run_scheme, PipelineConfig};
use ubcs_core::scalar::ratio;
use ubcs_core::scheme::subscriber_lp;
use ubcs_core::verify::{brute_force_lp_oracle, payments_from_differences, revenue_residual};
use ubcs_core::vot::{VotClassTable, VotDistribution};
use ubcs_core::{compute_payments, enumerate_paths, solve_lp, solve_so, solve_ue, LpStatus};

fn link(id: i64, tail: usize, head: usize, cost: LinkCostFn<f64>) -> Link<f64> {
    Link { id, tail, head, cost }
}

/// Parallel O-D links, or two stages of parallel links in series.
fn network(costs: &[(f64, f64)], serial_split: Option<usize>, demand: f64, frac: f64) -> Network<f64> {
    let lin = |&(a, b): &(f64, f64)| LinkCostFn::linear(a, b);
    let (nodes, links) = match serial_split {
        None => (
            vec!["O".into(), "D".into()],
            costs.iter().enumerate().map(|(i, c)| link(i as i64 + 1, 0, 1, lin(c))).collect(),
        ),
        Some(k) => (
            vec!["O".into(), "M".into(), "D".into()],
            costs
                .iter()
                .enumerate()
                .map(|(i, c)| if i < k { link(i as i64 + 1, 0, 1, lin(c)) } else { link(i as i64 + 1, 1, 2, lin(c)) })
                .collect(),
        ),
    };
    let destination = nodes.len() - 1;
    Network { nodes, links, origin: 0, destination, demand, subscriber_demand: demand * frac }
}

fn arb_network() -> impl Strategy<Value = Network<f64>> {
    (
        prop::collection::vec((1.0..20.0f64, 0.001..0.05f64), 2..=4),
        any::<bool>(),
        100.0..2000.0f64,
        0.1..=1.0f64,
    )
        .prop_map(|(costs, serial, d, frac)| {
            let split = (serial && costs.len() >= 2).then_some(costs.len() / 2);
            network(&costs, split, d, frac)
        })
}

fn arb_cost() -> impl Strategy<Value = LinkCostFn<f64>> {
    prop_oneof![
        (0.0..50.0f64, 0.0..1.0f64).prop_map(|(a, b)| LinkCostFn::linear(a, b)),
        prop::collection::vec(0.0..5.0f64, 1..5).prop_map(|coeffs| LinkCostFn::Polynomial { coeffs }),
        (0.1..30.0f64, 10.0..2000.0f64, 0.0..1.0f64, 1.0..6.0f64)
            .prop_map(|(free_flow, capacity, alpha, power)| LinkCostFn::Bpr { free_flow, capacity, alpha, power }),
    ]
}

fn arb_distribution() -> impl Strategy<Value = VotDistribution<f64>> {
    prop_oneof![
        (0.0..20.0f64, 1.0..60.0f64).prop_map(|(lo, w)| VotDistribution::uniform(lo, lo + w).unwrap()),
        (0.0..20.0f64, 1.0..60.0f64, 0.0..=1.0f64)
            .prop_map(|(lo, w, m)| VotDistribution::triangular(lo, lo + m * w, lo + w).unwrap()),
        (0.0..10.0f64, 0.0..5.0f64, prop::collection::vec((0.5..10.0f64, 0.1..5.0f64), 1..6)).prop_map(|(lo, h0, segs)| {
            let mut knots = vec![lo];
            let mut density = vec![h0];
            for (w, h) in segs {
                knots.push(knots.last().unwrap() + w);
                density.push(h);
            }
            VotDistribution::piecewise_linear(knots, density).unwrap()
        }),
    ]
}

fn bisect_inverse(dist: &VotDistribution<f64>, u: f64) -> f64 {
    let (mut lo, mut hi) = dist.support();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist.cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn count_simple_paths(n: usize, from: usize, to: usize, seen: &mut Vec<bool>) -> usize {
    if from == to {
        return 1;
    }
    seen[from] = true;
    let mut total = 0;
    for next in 0..n {
        if next != from && !seen[next] {
            total += count_simple_paths(n, next, to, seen);
        }
    }
    seen[from] = false;
    total
}

fn complete_digraph(n: usize, order: &[usize]) -> Network<f64> {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pairs.push((i, j));
            }
        }
    }
    let links = order
        .iter()
        .map(|&k| {
            let (i, j) = pairs[k % pairs.len()];
            link((i * n + j) as i64, i, j, LinkCostFn::linear(1.0, 0.01))
        })
        .collect();
    Network {
        nodes: (0..n).map(|i| format!("n{i}")).collect(),
        links,
        origin: 0,
        destination: n - 1,
        demand: 10.0,
        subscriber_demand: 5.0,
    }
}

fn min(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn check_optimality(sol: &FlowSolution<f64>, path_costs: &[f64], tol: f64) -> Result<(), TestCaseError> {
    let best = min(path_costs);
    for (f, c) in sol.path_flows.iter().zip(path_costs) {
        prop_assert!(*f >= -1e-9);
        if *f > 1e-3 * sol.demand {
            prop_assert!(c - best <= tol * (1.0 + best), "used path cost {c} vs min {best}");
        }
    }
    let total: f64 = sol.path_flows.iter().sum();
    prop_assert!((total - sol.demand).abs() <= 1e-6 * sol.demand);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn link_costs_increase_and_differentiate(cost in arb_cost(), q in 0.0..1500.0f64, dq in 0.1..100.0f64) {
        prop_assert!(cost.time(q + dq) >= cost.time(q));
        prop_assert!(cost.marginal(q) >= cost.time(q));
        let h = 1e-4 * (1.0 + q);
        let fd = (cost.time(q + h) - cost.time((q - h).max(0.0))) / (q + h - (q - h).max(0.0));
        let d = cost.derivative(q);
        prop_assert!((fd - d).abs() <= 1e-4 * (1.0 + d.abs()) + 1e-6 * cost.time(q + h), "{fd} vs {d}");
        let fi = (cost.integral(q + h) - cost.integral((q - h).max(0.0))) / (q + h - (q - h).max(0.0));
        prop_assert!((fi - cost.time(q)).abs() <= 1e-4 * (1.0 + cost.time(q)) + d.abs() * h);
    }

    #[test]
    fn path_count_matches_brute_force(n in 2usize..=5, seed in any::<u64>()) {
        let arcs = n * (n - 1);
        let mut order: Vec<usize> = (0..arcs).collect();
        let mut s = seed;
        for i in (1..arcs).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let net = complete_digraph(n, &order);
        let ps = enumerate_paths(&net, DEFAULT_MAX_PATHS).unwrap();
        prop_assert_eq!(ps.len(), count_simple_paths(n, 0, n - 1, &mut vec![false; n]));

        // Same link set in sorted order gives the same path sequence.
        let sorted = complete_digraph(n, &(0..arcs).collect::<Vec<_>>());
        let a: Vec<Vec<i64>> = ps.paths.iter().map(|p| net.link_ids(p)).collect();
        let b: Vec<Vec<i64>> = enumerate_paths(&sorted, DEFAULT_MAX_PATHS).unwrap().paths.iter().map(|p| sorted.link_ids(p)).collect();
        prop_assert_eq!(&a, &b);
        let mut lex = a.clone();
        lex.sort();
        prop_assert_eq!(&a, &lex);

        let column_sums: Vec<usize> = (0..ps.len()).map(|r| (0..net.links.len()).filter(|&l| ps.uses(l, r)).count()).collect();
        let lengths: Vec<usize> = ps.paths.iter().map(Vec::len).collect();
        prop_assert_eq!(column_sums, lengths);
    }

    #[test]
    fn cdf_inverse_round_trip(dist in arb_distribution(), u in 0.0..=1.0f64) {
        let b = dist.inverse_cdf(u).unwrap();
        let (lo, hi) = dist.support();
        prop_assert!(b >= lo && b <= hi);
        prop_assert!((dist.cdf(b) - u).abs() <= 1e-9);
        if u > 0.0 && u < 1.0 {
            let oracle = bisect_inverse(&dist, u);
            prop_assert!((b - oracle).abs() <= 1e-7 * (1.0 + hi), "{b} vs {oracle}");
        }
        prop_assert!(dist.inverse_cdf(1.5).is_err());
    }

    #[test]
    fn class_table_is_consistent(dist in arb_distribution(), subs in 1.0..5000.0f64, m in 1usize..80) {
        let t = dist.discretize(subs, m).unwrap();
        let t2 = dist.discretize(subs, 2 * m).unwrap();
        prop_assert!((t.total_demand() - subs).abs() <= 1e-9 * subs);
        for k in 0..m {
            prop_assert!(t.boundaries[k] < t.boundaries[k + 1]);
            if t.demand[k] > 0.0 {
                prop_assert!(t.mean[k] >= t.boundaries[k] - 1e-9 && t.mean[k] <= t.boundaries[k + 1] + 1e-9);
            }
        }
        // Class means are conditional means, so the demand-weighted mean is
        // the distribution mean at every resolution.
        let weighted = |t: &VotClassTable<f64>| t.demand.iter().zip(&t.mean).map(|(d, b)| d * b).sum::<f64>() / subs;
        prop_assert!((weighted(&t) - dist.mean()).abs() <= 1e-8 * (1.0 + dist.mean()));
        prop_assert!((weighted(&t2) - weighted(&t)).abs() <= 1e-8 * (1.0 + dist.mean()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn equilibria_satisfy_optimality_conditions(net in arb_network()) {
        let ps = enumerate_paths(&net, DEFAULT_MAX_PATHS).unwrap();
        let so = solve_so(&net, &ps, SolverOptions::default()).unwrap();
        let ue = solve_ue(&net, &ps, SolverOptions::default()).unwrap();
        let marginal: Vec<f64> = net.links.iter().zip(&so.link_flows).map(|(l, q)| l.cost.marginal(*q)).collect();
        check_optimality(&so, &ps.path_costs(&marginal), 1e-6)?;
        check_optimality(&ue, &ue.path_times, 1e-6)?;
        prop_assert!(so.total_time <= ue.total_time * (1.0 + 1e-9));
        let t_ue = ue.ue_time.unwrap();
        prop_assert!((ue.average_time().unwrap() - t_ue).abs() <= 1e-6 * t_ue);
    }

    #[test]
    fn random_instances_keep_all_guarantees(net in arb_network(), lo in 0.0..20.0f64, w in 5.0..60.0f64, tri in any::<bool>()) {
        let dist = if tri {
            VotDistribution::triangular(lo, lo + 0.3 * w, lo + w).unwrap()
        } else {
            VotDistribution::uniform(lo, lo + w).unwrap()
        };
        let cfg = PipelineConfig { classes: 40, sp_grid: 61, cost_grid: 61, ..PipelineConfig::default() };
        let r = run_scheme(&net, &dist, &cfg).unwrap();
        prop_assert!(r.verification.passed(), "{:?}", r.verification);
        let o = &r.outcome;
        for w in o.sorted_times.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        for w in o.payments.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
    }
}

fn arb_payment_inputs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0..20.0f64, n),
            prop::collection::vec(0.0..1.0f64, n - 1),
            prop::collection::vec(0.01..1.0f64, n),
            1.0..30.0f64,
            5.0..60.0f64,
        )
            .prop_map(|(gaps, cuts, weights, lo, width)| {
                let mut times = vec![30.0];
                for g in &gaps[1..] {
                    times.push(times.last().unwrap() - g * 0.2);
                }
                let mut inner: Vec<f64> = cuts.iter().map(|c| lo + c * width).collect();
                inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut partition = vec![lo];
                partition.extend(inner);
                partition.push(lo + width);
                let total: f64 = weights.iter().sum();
                let rho = weights.iter().map(|w| w / total).collect();
                (times, partition, rho)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn payments_follow_adjacent_differences((times, partition, rho) in arb_payment_inputs()) {
        let p = compute_payments(&times, &partition, &rho).unwrap();
        let scale = 1.0 + p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 1..p.len() {
            let step = (times[i - 1] - times[i]) * partition[i] / 60.0;
            prop_assert!((p[i] - p[i - 1] - step).abs() <= 1e-12 * scale);
        }
        prop_assert!(revenue_residual(&rho, &p).abs() <= 1e-12 * scale);
        // Charges rise toward faster paths: slowest pays least, fastest most.
        prop_assert!(p[0] <= 1e-12 && p[p.len() - 1] >= -1e-12);
        let alt = payments_from_differences(&times, &partition, &rho);
        for (a, b) in p.iter().zip(&alt) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn exact_payments_net_to_zero(raw in prop::collection::vec((1i64..40, 1i64..50, 1i64..20), 2..6)) {
        let mut t = 600i64;
        let mut b = 5i64;
        let (mut times, mut partition, mut weights) = (Vec::new(), vec![ratio(b, 1)], Vec::new());
        for (dt, db, w) in &raw {
            times.push(ratio(t, 1));
            t -= dt;
            b += db;
            partition.push(ratio(b, 1));
            weights.push(*w);
        }
        let total: i64 = weights.iter().sum();
        let rho: Vec<BigRational> = weights.iter().map(|w| ratio(*w, total)).collect();
        let p = compute_payments(&times, &partition, &rho).unwrap();
        prop_assert_eq!(revenue_residual(&rho, &p), ratio(0, 1));
    }
}

fn parallel_paths(k: usize) -> PathSet {
    PathSet { paths: (0..k).map(|r| vec![r]).collect(), incidence: (0..k).map(|a| (0..k).map(|r| a == r).collect()).collect() }
}

fn arb_lp_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=3, 2usize..=3).prop_flat_map(|(m, r)| {
        (
            prop::collection::vec(1u32..8, m),
            prop::collection::vec(1u32..60, m),
            prop::collection::vec(10u32..60, r),
            prop::collection::vec(0.0..1.0f64, r),
        )
            .prop_map(|(demand, mean, times, cuts)| {
                let demand: Vec<f64> = demand.into_iter().map(f64::from).collect();
                let total: f64 = demand.iter().sum();
                // Integer path totals summing to the class total.
                let mut totals = vec![0.0; cuts.len()];
                let mut left = total;
                for (i, c) in cuts.iter().enumerate() {
                    let take = if i + 1 == cuts.len() { left } else { (c * left).floor() };
                    totals[i] = take;
                    left -= take;
                }
                (demand, mean.into_iter().map(f64::from).collect(), times.into_iter().map(f64::from).collect(), totals)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn subscriber_lp_matches_lattice_oracle((demand, mean, times, totals) in arb_lp_case()) {
        let paths = parallel_paths(times.len());
        let lp: StandardLp<f64> = subscriber_lp(&totals, &paths, &mean, &demand, &times);
        let sol = solve_lp(&lp).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        let classes = VotClassTable { boundaries: vec![0.0; demand.len() + 1], demand: demand.clone(), mean: mean.clone() };
        let best = brute_force_lp_oracle(&classes, &totals, &times, 1.0).unwrap();
        prop_assert!((sol.objective - best).abs() <= 1e-9 * best, "{} vs {best}", sol.objective);
        prop_assert!(lp.residual(&sol.x) <= 1e-9);

        let q = |v: &[f64]| v.iter().map(|x| ratio(*x as i64, 1)).collect::<Vec<_>>();
        let exact: StandardLp<BigRational> = subscriber_lp(&q(&totals), &paths, &q(&mean), &q(&demand), &q(&times));
        let xs = solve_lp(&exact).unwrap();
        prop_assert_eq!(xs.status, LpStatus::Optimal);
        prop_assert_eq!(xs.objective, ratio(best.round() as i64, 1));
    }
}

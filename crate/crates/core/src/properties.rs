//! Property tests for invariants of the graph, potential, coupling and
//! sampler modules on random small graphs.

use crate::coupling::{poisson_shift_tv, ppp_gap, ppp_oplus_tv, ppp_tv_upper, tv, DiscreteDistribution};
use crate::graph::{read_graph, write_graph, GraphBuilder, KilledWeightedGraph, VertexId, VertexSet};
use crate::potential::Potential;
use crate::sampler::{NoReturnKernel, WindowSampler};
use crate::RngStream;
use proptest::prelude::*;

/// Connected graph on `n` vertices: a random spanning tree plus extra
/// edges, positive kill weights on a random nonempty subset, some loops.
fn arb_graph() -> impl Strategy<Value = KilledWeightedGraph> {
    (2usize..7).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((0.0f64..1.0, 0.1f64..3.0), n - 1),
            prop::collection::vec((0..n, 0..n, 0.1f64..3.0), 0..n),
            prop::collection::vec(prop::option::of(0.05f64..2.0), n),
            prop::collection::vec(prop::option::weighted(0.3, 0.1f64..1.0), n),
        )
            .prop_map(|(n, tree, extra, kills, loops)| {
                let mut b = GraphBuilder::new(n);
                let mut seen = std::collections::BTreeMap::new();
                for (i, (r, w)) in tree.into_iter().enumerate() {
                    let child = i + 1;
                    let parent = ((r * child as f64) as usize).min(child - 1);
                    seen.insert((parent, child), w);
                }
                for (u, v, w) in extra {
                    if u != v {
                        seen.entry((u.min(v), u.max(v))).or_insert(w);
                    }
                }
                for ((u, v), w) in seen {
                    b.edge(u, v, w);
                }
                let mut any = false;
                for (x, k) in kills.into_iter().enumerate() {
                    if let Some(k) = k {
                        b.kill(x, k);
                        any = true;
                    }
                }
                if !any {
                    b.kill(n - 1, 1.0);
                }
                for (x, l) in loops.into_iter().enumerate() {
                    if let Some(l) = l {
                        b.self_loop(x, l);
                    }
                }
                b.build().expect("valid random graph")
            })
    })
}

/// Graph with nested nonempty sets `K ⊆ L`.
fn arb_nested() -> impl Strategy<Value = (KilledWeightedGraph, VertexSet, VertexSet)> {
    arb_graph().prop_flat_map(|g| {
        let n = g.vertex_count();
        (Just(g), prop::collection::vec(0..3u8, n), 0..n).prop_map(|(g, tags, anchor)| {
            // tag 0: outside, 1: in L only, 2: in K (and L)
            let k = VertexSet::from_indices((0..g.vertex_count()).filter(|&i| tags[i] == 2 || i == anchor));
            let l = VertexSet::from_indices((0..g.vertex_count()).filter(|&i| tags[i] >= 1 || i == anchor));
            (g, k, l)
        })
    })
}

fn arb_distribution(m: usize) -> impl Strategy<Value = DiscreteDistribution<usize>> {
    prop::collection::vec(0.01f64..1.0, m).prop_map(|w| {
        let s: f64 = w.iter().sum();
        DiscreteDistribution::probability(w.into_iter().enumerate().map(|(i, x)| (i, x / s))).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_file_round_trip(g in arb_graph()) {
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        let h = read_graph(buf.as_slice()).unwrap();
        prop_assert_eq!(g.edges(), h.edges());
        prop_assert_eq!(g.kill_weights(), h.kill_weights());
        prop_assert_eq!(g.total_weights(), h.total_weights());
    }

    #[test]
    fn rows_are_stochastic(g in arb_graph()) {
        for x in g.vertices() {
            prop_assert!(g.row_sum_defect(x) < 1e-12);
        }
    }

    #[test]
    fn escape_probabilities_are_probabilities((g, k, _l) in arb_nested()) {
        let p = Potential::new(&g);
        let eq = p.equilibrium(&k).unwrap();
        for x in g.vertices() {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&eq.escape[x.0]));
        }
        let total: f64 = k.iter().map(|x| eq.measure[x.0]).sum();
        prop_assert!((total - eq.capacity).abs() < 1e-12 * eq.capacity.max(1.0));
    }

    #[test]
    fn capacity_is_monotone((g, k, l) in arb_nested()) {
        let p = Potential::new(&g);
        let ck = p.equilibrium(&k).unwrap().capacity;
        let cl = p.equilibrium(&l).unwrap().capacity;
        prop_assert!(ck <= cl + 1e-12 * cl.max(1.0));
    }

    #[test]
    fn consistency_pushforward_recovers_equilibrium((g, k, l) in arb_nested()) {
        let p = Potential::new(&g);
        let push = p.consistency_pushforward(&k, &l).unwrap();
        let eq = p.equilibrium(&k).unwrap();
        for x in g.vertices() {
            prop_assert!((push[x.0] - eq.measure[x.0]).abs() < 1e-10);
        }
    }

    #[test]
    fn hinge_is_symmetric_with_equilibrium_marginals((g, _k, l) in arb_nested()) {
        let p = Potential::new(&g);
        let h = p.hinge(&l).unwrap();
        let eq = p.equilibrium(&l).unwrap();
        prop_assert!(h.max_asymmetry() < 1e-10);
        for x in h.boundary.iter() {
            prop_assert!((h.row_sum(x) - eq.measure[x.0]).abs() < 1e-10);
        }
        prop_assert!((h.total_mass() - eq.capacity).abs() < 1e-10);
    }

    #[test]
    fn green_function_is_reversible(g in arb_graph()) {
        let gm = Potential::new(&g).greens().unwrap();
        let a = g.total_weights();
        for x in g.vertices() {
            for y in g.vertices() {
                let lhs = a[x.0] * gm.get(x, y);
                let rhs = a[y.0] * gm.get(y, x);
                prop_assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn conditioned_rows_are_stochastic((g, k, _l) in arb_nested()) {
        let p = Potential::new(&g);
        let kernel = NoReturnKernel::new(&p, &k).unwrap();
        let esc = p.escape_probability(&k).unwrap();
        let avoid = p.avoidance_probability(&k).unwrap();
        for y in g.vertices() {
            let h = if k.contains(y) { esc[y.0] } else { avoid[y.0] };
            if h > 1e-9 {
                prop_assert!(kernel.row_defect(&g, y) < 1e-9);
            }
        }
    }

    #[test]
    fn levels_are_nested((g, k, _l) in arb_nested(), seed in any::<u64>()) {
        let sampler = WindowSampler::new(&g, &k).unwrap();
        let levels = sampler.sample_levels(&[0.5, 1.0, 2.0], &mut RngStream::new(seed, 0)).unwrap();
        for w in levels.windows(2) {
            for t in &w[0].1.trajectories {
                prop_assert!(w[1].1.trajectories.contains(t));
            }
            for x in k.iter() {
                prop_assert!(!w[0].1.fields.occupied(x) || w[1].1.fields.occupied(x));
            }
        }
    }

    #[test]
    fn sampled_trajectories_enter_the_window((g, k, _l) in arb_nested(), seed in any::<u64>()) {
        let s = WindowSampler::new(&g, &k).unwrap().sample_marked(3.0, &mut RngStream::new(seed, 1)).unwrap();
        for w in &s.trajectories {
            prop_assert!(k.contains(w.entry));
            // the backward leg never returns to K after the entry point
            prop_assert!(w.backward.vertices.iter().skip(1).all(|&v| !k.contains(v)));
            prop_assert!(w.mark.is_some_and(|m| m > 0.0 && m <= 3.0));
        }
    }

    #[test]
    fn total_variation_is_a_metric(p in arb_distribution(4), q in arb_distribution(4), r in arb_distribution(4)) {
        let pq = tv(&p, &q).unwrap().distance;
        let qr = tv(&q, &r).unwrap().distance;
        let pr = tv(&p, &r).unwrap().distance;
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert!((pq - tv(&q, &p).unwrap().distance).abs() < 1e-15);
        prop_assert!(pr <= pq + qr + 1e-15);
        prop_assert!(tv(&p, &p).unwrap().distance.abs() < 1e-15);
    }

    #[test]
    fn ppp_gap_decreases_in_eps(nu in arb_distribution(3), pi in arb_distribution(3), e1 in 0.05f64..5.0, e2 in 0.05f64..5.0) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(ppp_gap(&nu, &pi, hi).unwrap() <= ppp_gap(&nu, &pi, lo).unwrap() + 1e-15);
    }

    #[test]
    fn ppp_perturbation_below_upper_bound(w in prop::collection::vec(0.2f64..3.0, 2), pi in arb_distribution(2), eps in 0.05f64..0.9) {
        let nu = DiscreteDistribution::measure(w.into_iter().enumerate()).unwrap();
        let gap = ppp_gap(&nu, &pi, eps).unwrap();
        prop_assume!(gap < 0.95);
        let exact = ppp_oplus_tv(&nu, &pi, 1e-12).unwrap();
        let upper = ppp_tv_upper(&nu, &pi, eps, gap).unwrap();
        prop_assert!(exact <= upper + 1e-9, "exact {} > upper {}", exact, upper);
    }

    #[test]
    fn poisson_shift_below_bound(lambda in 0.01f64..200.0) {
        let t = poisson_shift_tv(lambda).unwrap();
        prop_assert!(t.exact >= 0.0);
        prop_assert!(t.exact <= t.bound + 1e-12);
    }
}

#[test]
fn vertex_ids_out_of_range_are_rejected() {
    let g = crate::graph::build_graph(2, &[(0, 1, 1.0)], &[(0, 1.0)]).unwrap();
    assert!(g.check_vertex(VertexId(2)).is_err());
}

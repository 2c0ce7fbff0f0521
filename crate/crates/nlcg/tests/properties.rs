//! Randomized invariants across the solver stack.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nlcg::{
    all_configs, assemble_q_input, brute_force_max, complete_graph, count_pieces,
    enumerate_optimize, exact_piece_max, iterative_optimize, random_tree, sample_instance,
    sample_random_net, sample_tables, w_max_sum, Inner, IterativeOptions, JointAction,
    MessageState, QInput,
};

const TOL: f64 = 1e-9;

fn random_q(d: usize, seed: u64) -> QInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    QInput((0..d).map(|_| rng.gen_range(-3.0..3.0)).collect())
}

fn random_action(n_agents: usize, n_actions: usize, seed: u64) -> JointAction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    JointAction((0..n_agents).map(|_| rng.gen_range(0..n_actions)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realized_piece_reproduces_forward_and_dominates(
        d in 2usize..=10,
        m in 1usize..=6,
        alpha in prop_oneof![Just(0.0), Just(0.2), Just(0.5), Just(1.0)],
        seed in any::<u64>(),
    ) {
        let net = sample_random_net(d, &[m], alpha, seed).unwrap();
        let q = random_q(d, seed ^ 0x5eed);
        let (v, realized) = net.forward(&q).unwrap();
        let rv = net.piece(&realized).unwrap().eval(&q);
        prop_assert!((v - rv).abs() <= TOL * v.abs().max(1.0));
        for c in all_configs(m).unwrap() {
            let pv = net.piece(&c).unwrap().eval(&q);
            prop_assert!(pv <= v + TOL, "piece {:#b} at {pv} beats forward {v}", c.bits());
        }
    }

    #[test]
    fn assembled_input_reads_tables_by_action(
        n_agents in 1usize..=5,
        n_actions in 2usize..=4,
        seed in any::<u64>(),
    ) {
        let graph = complete_graph(n_agents, n_actions).unwrap();
        let (f_v, f_e) = sample_tables(&graph, seed);
        let a = random_action(n_agents, n_actions, seed ^ 0x0ac7_1013);
        let q = assemble_q_input(&graph, &f_v, &f_e, &a).unwrap();
        prop_assert_eq!(q.0.len(), graph.input_dim());
        for i in 0..n_agents {
            prop_assert_eq!(q.0[i], f_v.get(i, a.0[i]));
        }
        for (e, &(i, j)) in graph.edges().iter().enumerate() {
            prop_assert_eq!(q.0[n_agents + e], f_e.get(e, a.0[i], a.0[j]));
        }
    }

    #[test]
    fn message_passing_never_beats_the_exhaustive_piece_max(
        n_agents in 2usize..=5,
        n_actions in 2usize..=3,
        on_tree in any::<bool>(),
        k in 1usize..=6,
        seed in any::<u64>(),
    ) {
        let graph = if on_tree {
            random_tree(n_agents, n_actions, seed).unwrap()
        } else {
            complete_graph(n_agents, n_actions).unwrap()
        };
        let (f_v, f_e) = sample_tables(&graph, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
        let w_v: Vec<f64> = (0..n_agents).map(|_| rng.gen_range(0.0..2.0)).collect();
        let w_e: Vec<f64> = (0..graph.n_edges()).map(|_| rng.gen_range(0.0..2.0)).collect();
        let bias = rng.gen_range(-1.0..1.0);
        let r = w_max_sum(&graph, &f_v, &f_e, &w_v, &w_e, bias, k).unwrap();
        let (exact, _) = exact_piece_max(&graph, &f_v, &f_e, &w_v, &w_e, bias).unwrap();
        prop_assert!(r.q_max <= exact + TOL, "decoded {} above exact {exact}", r.q_max);
    }

    #[test]
    fn messages_stay_zero_mean(
        n_agents in 2usize..=5,
        n_actions in 2usize..=4,
        rounds in 1usize..=5,
        seed in any::<u64>(),
    ) {
        let graph = complete_graph(n_agents, n_actions).unwrap();
        let (f_v, f_e) = sample_tables(&graph, seed);
        let fe_scaled: Vec<Vec<Vec<f64>>> = f_e.0.clone();
        let q: Vec<Vec<f64>> = f_v.0.clone();
        let mut state = MessageState::new(&graph);
        for _ in 0..rounds {
            state.round(&graph, &fe_scaled, &q);
        }
        for msg in state.mu().iter().chain(state.mu_bar()) {
            let mean = msg.iter().sum::<f64>() / msg.len() as f64;
            prop_assert!(mean.abs() <= 1e-12, "message mean {mean}");
        }
    }

    #[test]
    fn solver_results_satisfy_their_contracts(
        n_agents in 2usize..=4,
        n_actions in 2usize..=3,
        m in 1usize..=4,
        alpha in prop_oneof![Just(0.0), Just(0.2), Just(0.5), Just(1.0)],
        seed in any::<u64>(),
    ) {
        let (g, f_v, f_e, net) = sample_instance(n_agents, n_actions, m, alpha, seed).unwrap();
        let (oracle, _) = brute_force_max(&g, &f_v, &f_e, &net).unwrap();

        let e = enumerate_optimize(&g, &f_v, &f_e, &net, Inner::Exact).unwrap();
        prop_assert!((e.q_max - oracle).abs() <= TOL);

        let opts = IterativeOptions { seed: seed ^ 0xf00d, ..Default::default() };
        let it = iterative_optimize(&g, &f_v, &f_e, &net, &opts).unwrap();
        for r in [&e, &it] {
            let q = assemble_q_input(&g, &f_v, &f_e, &r.a_max).unwrap();
            let (v, _) = net.forward(&q).unwrap();
            prop_assert!((v - r.q_max).abs() <= TOL, "q_max {} vs forward {v}", r.q_max);
            prop_assert!(r.value_trace.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(*r.value_trace.last().unwrap(), r.q_max);
        }
        prop_assert!(it.q_max <= oracle + TOL);
        prop_assert!(it.pieces_visited <= opts.n_max.min(1 << m) as u64);
    }

    #[test]
    fn piece_counts_follow_the_additive_recurrence(
        m in 1u32..=14,
        d in 2u32..=14,
    ) {
        let whole = count_pieces(m, d).unwrap();
        let drop_unit = count_pieces(m - 1, d).unwrap();
        let drop_dim = count_pieces(m - 1, d - 1).unwrap();
        prop_assert_eq!(whole, drop_unit + drop_dim);
        if d >= m {
            prop_assert_eq!(whole, 1u128 << m);
        }
    }
}

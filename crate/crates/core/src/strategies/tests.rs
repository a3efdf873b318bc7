use super::local::train_on_shard;
use super::*;
use crate::data::{partition, synth_blobs, PartitionMode, PartitionSpec, SizeProfile};
use crate::nn::{backward, forward, init_model, sgd_step, softmax_cross_entropy};
use crate::nn::{ActivationKind, LayerSpec};
use crate::runtime::CostModel;
use crate::{ClientShard, Dataset, Matrix, MlpModel, Optimizer};

fn model_for(dim: usize, classes: usize, seed: u64) -> MlpModel {
    init_model(
        &[
            LayerSpec::new(dim, 8, ActivationKind::Relu),
            LayerSpec::new(8, classes, ActivationKind::Identity),
        ],
        seed,
    )
    .unwrap()
}

fn world_from_shards(shards: Vec<ClientShard>, cfg: &StrategyConfig, seed: u64) -> World {
    let dim = shards[0].features.cols();
    let classes = shards
        .iter()
        .flat_map(|s| s.labels.iter().copied())
        .max()
        .unwrap()
        + 1;
    let model = model_for(dim, classes, seed);
    let optimizer = Optimizer::new(cfg.optimizer, &model.to_params());
    World::new(model, optimizer, shards, CostModel::default())
}

fn canonical_sizes_dataset() -> Dataset {
    synth_blobs(4, 100, 5, 6.0, 1.0, 21).unwrap() // 400 rows
}

fn canonical_shards() -> Vec<ClientShard> {
    partition(
        &canonical_sizes_dataset(),
        &PartitionSpec {
            mode: PartitionMode::ImbalancedIid,
            n_clients: 4,
            labels_per_client: 1,
            size_profile: SizeProfile::PaperRatio,
            seed: 8,
        },
    )
    .unwrap()
}

fn balanced_shards(n_clients: usize, per_class: usize) -> Vec<ClientShard> {
    let ds = synth_blobs(3, per_class, 4, 6.0, 1.0, 33).unwrap();
    partition(
        &ds,
        &PartitionSpec {
            mode: PartitionMode::BalancedIid,
            n_clients,
            labels_per_client: 1,
            size_profile: SizeProfile::Equal,
            seed: 4,
        },
    )
    .unwrap()
}

mod fedavg_behavior {
    use super::*;

    #[test]
    fn single_client_equals_centralized_training() {
        let shards = balanced_shards(1, 40);
        let cfg = StrategyConfig::new(StrategyKind::FedAvg);
        let mut world = world_from_shards(shards.clone(), &cfg, 1);
        let initial = world.server.global_model.to_params();

        let mut strategy = FedAvg::new(cfg, false);
        strategy.run_iteration(&mut world).unwrap();

        // Centralized oracle: same epochs, batches, and fresh optimizer.
        let mut oracle = MlpModel::from_params(initial.clone()).unwrap();
        let mut opt = Optimizer::new(cfg.optimizer, &initial);
        train_on_shard(
            &mut oracle,
            &shards[0],
            cfg.local_epochs,
            cfg.local_batch_size,
            &mut opt,
            &CostModel::default(),
        )
        .unwrap();
        assert_eq!(world.server.global_model.to_params(), oracle.to_params());
    }

    #[test]
    fn identical_shards_average_to_either_local_model() {
        let shards = balanced_shards(1, 40);
        let twin = ClientShard {
            client_id: 1,
            ..shards[0].clone()
        };
        let pair = vec![shards[0].clone(), twin];
        let cfg = StrategyConfig::new(StrategyKind::FedAvg);
        let mut world = world_from_shards(pair.clone(), &cfg, 2);
        let initial = world.server.global_model.to_params();
        FedAvg::new(cfg, false).run_iteration(&mut world).unwrap();

        let mut local = MlpModel::from_params(initial.clone()).unwrap();
        let mut opt = Optimizer::new(cfg.optimizer, &initial);
        train_on_shard(
            &mut local,
            &pair[0],
            cfg.local_epochs,
            cfg.local_batch_size,
            &mut opt,
            &CostModel::default(),
        )
        .unwrap();
        assert_eq!(world.server.global_model.to_params(), local.to_params());
    }

    #[test]
    fn three_clients_match_elementwise_mean_oracle() {
        let shards = balanced_shards(3, 60);
        let cfg = StrategyConfig::new(StrategyKind::FedAvg);
        let mut world = world_from_shards(shards.clone(), &cfg, 3);
        let initial = world.server.global_model.to_params();
        FedAvg::new(cfg, false).run_iteration(&mut world).unwrap();

        let mut locals = Vec::new();
        for shard in &shards {
            let mut local = MlpModel::from_params(initial.clone()).unwrap();
            let mut opt = Optimizer::new(cfg.optimizer, &initial);
            train_on_shard(
                &mut local,
                shard,
                cfg.local_epochs,
                cfg.local_batch_size,
                &mut opt,
                &CostModel::default(),
            )
            .unwrap();
            locals.push(local.to_params());
        }
        let mut flats: Vec<Vec<f64>> = Vec::new();
        for l in &locals {
            let mut v = Vec::new();
            l.for_each_entry(|x| v.push(x));
            flats.push(v);
        }
        let mut idx = 0;
        world.server.global_model.to_params().for_each_entry(|got| {
            let expected = (flats[0][idx] + flats[1][idx] + flats[2][idx]) / 3.0;
            assert!((got - expected).abs() < 1e-12);
            idx += 1;
        });
    }

    #[test]
    fn empty_shard_is_skipped_with_a_warning() {
        let mut shards = balanced_shards(2, 40);
        shards[1].features = Matrix::zeros(0, 4);
        shards[1].labels.clear();
        shards[1].source_rows.clear();
        let cfg = StrategyConfig::new(StrategyKind::FedAvg);
        let mut world = world_from_shards(shards, &cfg, 4);
        FedAvg::new(cfg, false).run_iteration(&mut world).unwrap();
        assert!(world.log.events().iter().any(|e| e.kind == "warning"));
    }
}

mod wfedavg_behavior {
    use super::*;

    #[test]
    fn equal_sizes_reduce_to_plain_fedavg() {
        let cfg_plain = StrategyConfig::new(StrategyKind::FedAvg);
        let cfg_weighted = StrategyConfig::new(StrategyKind::WFedAvg);
        let mut plain = world_from_shards(balanced_shards(3, 60), &cfg_plain, 5);
        let mut weighted = world_from_shards(balanced_shards(3, 60), &cfg_weighted, 5);
        FedAvg::new(cfg_plain, false).run_iteration(&mut plain).unwrap();
        FedAvg::new(cfg_weighted, true).run_iteration(&mut weighted).unwrap();
        let diff = plain
            .server
            .global_model
            .to_params()
            .max_abs_diff(&weighted.server.global_model.to_params());
        assert!(diff <= 1e-12, "diff {diff}");
    }

    #[test]
    fn canonical_sizes_apply_paper_ratio_weights() {
        let shards = canonical_shards();
        let sizes: Vec<usize> = shards.iter().map(ClientShard::size).collect();
        assert_eq!(sizes, vec![200, 100, 50, 50]);
        let cfg = StrategyConfig::new(StrategyKind::WFedAvg);
        let mut world = world_from_shards(shards.clone(), &cfg, 6);
        let initial = world.server.global_model.to_params();
        FedAvg::new(cfg, true).run_iteration(&mut world).unwrap();

        // Oracle: weighted mean with weights 0.5 / 0.25 / 0.125 / 0.125.
        let mut locals = Vec::new();
        for shard in &shards {
            let mut local = MlpModel::from_params(initial.clone()).unwrap();
            let mut opt = Optimizer::new(cfg.optimizer, &initial);
            train_on_shard(
                &mut local,
                shard,
                cfg.local_epochs,
                cfg.local_batch_size,
                &mut opt,
                &CostModel::default(),
            )
            .unwrap();
            let mut flat = Vec::new();
            local.to_params().for_each_entry(|x| flat.push(x));
            locals.push(flat);
        }
        let weights = [0.5, 0.25, 0.125, 0.125];
        let mut idx = 0;
        world.server.global_model.to_params().for_each_entry(|got| {
            let expected: f64 = (0..4).map(|c| weights[c] * locals[c][idx]).sum();
            assert!((got - expected).abs() < 1e-12);
            idx += 1;
        });
    }

    #[test]
    fn dominant_client_owns_the_global_model() {
        let shards = balanced_shards(1, 40);
        let mut empty_a = ClientShard {
            client_id: 1,
            ..shards[0].clone()
        };
        empty_a.features = Matrix::zeros(0, 4);
        empty_a.labels.clear();
        empty_a.source_rows.clear();
        let cfg = StrategyConfig::new(StrategyKind::WFedAvg);
        let mut world = world_from_shards(vec![shards[0].clone(), empty_a], &cfg, 7);
        let initial = world.server.global_model.to_params();
        FedAvg::new(cfg, true).run_iteration(&mut world).unwrap();

        let mut local = MlpModel::from_params(initial.clone()).unwrap();
        let mut opt = Optimizer::new(cfg.optimizer, &initial);
        train_on_shard(
            &mut local,
            &shards[0],
            cfg.local_epochs,
            cfg.local_batch_size,
            &mut opt,
            &CostModel::default(),
        )
        .unwrap();
        assert_eq!(world.server.global_model.to_params(), local.to_params());
    }
}

mod cycle_behavior {
    use super::*;

    #[test]
    fn two_clients_equal_sequential_centralized_training() {
        let shards = balanced_shards(2, 40);
        let cfg = StrategyConfig::new(StrategyKind::Cycle);
        let mut world = world_from_shards(shards.clone(), &cfg, 8);
        let initial = world.server.global_model.to_params();
        CycleLearning::new(cfg).run_iteration(&mut world).unwrap();

        // Oracle: train on shard 0 then shard 1, fresh optimizer per phase.
        let mut oracle = MlpModel::from_params(initial).unwrap();
        for shard in &shards {
            let mut opt = Optimizer::new(cfg.optimizer, &oracle.to_params());
            train_on_shard(
                &mut oracle,
                shard,
                cfg.local_epochs,
                cfg.local_batch_size,
                &mut opt,
                &CostModel::default(),
            )
            .unwrap();
        }
        assert_eq!(world.server.global_model.to_params(), oracle.to_params());
    }

    #[test]
    fn single_client_cycle_equals_single_client_fedavg() {
        let shards = balanced_shards(1, 40);
        let cfg_c = StrategyConfig::new(StrategyKind::Cycle);
        let cfg_f = StrategyConfig::new(StrategyKind::FedAvg);
        let mut cycle_world = world_from_shards(shards.clone(), &cfg_c, 9);
        let mut fedavg_world = world_from_shards(shards, &cfg_f, 9);
        CycleLearning::new(cfg_c).run_iteration(&mut cycle_world).unwrap();
        FedAvg::new(cfg_f, false).run_iteration(&mut fedavg_world).unwrap();
        assert_eq!(
            cycle_world.server.global_model.to_params(),
            fedavg_world.server.global_model.to_params()
        );
    }

    #[test]
    fn sequential_visits_cost_more_than_one_parallel_window() {
        let shards = balanced_shards(2, 40);
        let cfg_c = StrategyConfig::new(StrategyKind::Cycle);
        let cfg_f = StrategyConfig::new(StrategyKind::FedAvg);
        let mut cycle_world = world_from_shards(shards.clone(), &cfg_c, 10);
        let mut fedavg_world = world_from_shards(shards, &cfg_f, 10);
        let cycle_t = CycleLearning::new(cfg_c).run_iteration(&mut cycle_world).unwrap();
        let fedavg_t = FedAvg::new(cfg_f, false)
            .run_iteration(&mut fedavg_world)
            .unwrap();
        assert!(cycle_t > fedavg_t, "cycle {cycle_t} vs fedavg {fedavg_t}");
    }
}

mod chunk_parallel_behavior {
    use super::*;
    use crate::nn::OptimizerKind;

    fn sgd_cfg(batch: usize, window: usize) -> StrategyConfig {
        let mut cfg = StrategyConfig::new(StrategyKind::Proposed);
        cfg.batch_size = batch;
        cfg.parallel_window_size = window;
        cfg.optimizer = OptimizerKind::Sgd { learning_rate: 0.05 };
        cfg
    }

    #[test]
    fn one_full_step_equals_centralized_minibatch_sgd() {
        // Two clients of 50 rows; batch 100, window 2 -> a single step
        // whose union is the whole 100-row batch.
        let ds = synth_blobs(2, 50, 3, 6.0, 1.0, 40).unwrap();
        let shards = partition(
            &ds,
            &PartitionSpec {
                mode: PartitionMode::BalancedIid,
                n_clients: 2,
                labels_per_client: 1,
                size_profile: SizeProfile::Equal,
                seed: 11,
            },
        )
        .unwrap();
        let cfg = sgd_cfg(100, 2);
        let mut world = world_from_shards(shards.clone(), &cfg, 12);
        let initial = world.server.global_model.to_params();
        let mut strategy = ChunkParallel::new(cfg);
        strategy.install(&mut world).unwrap();
        assert_eq!(strategy.schedule().unwrap().step_count(), 1);
        strategy.run_iteration(&mut world).unwrap();

        // Centralized oracle: backward over the concatenated batch, one
        // SGD step. The batch is client 0's rows then client 1's rows.
        let mut oracle = MlpModel::from_params(initial).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for shard in &shards {
            for r in 0..shard.size() {
                rows.extend_from_slice(shard.features.row(r));
                labels.push(shard.labels[r]);
            }
        }
        let batch = Matrix::from_vec(100, 3, rows).unwrap();
        let cache = forward(&oracle, &batch).unwrap();
        let (_, d) = softmax_cross_entropy(cache.logits(), &labels).unwrap();
        let grads = backward(&oracle, &cache, &d).unwrap();
        sgd_step(&mut oracle, &grads, 0.05).unwrap();

        let diff = world
            .server
            .global_model
            .to_params()
            .max_abs_diff(&oracle.to_params());
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn canonical_schedule_runs_four_optimizer_steps_per_iteration() {
        let cfg = sgd_cfg(100, 2);
        let mut world = world_from_shards(canonical_shards(), &cfg, 13);
        let mut strategy = ChunkParallel::new(cfg);
        strategy.install(&mut world).unwrap();
        strategy.run_iteration(&mut world).unwrap();
        // Four aggregations: one loss_grad_report burst per step.
        let reports = world
            .log
            .events()
            .iter()
            .filter(|e| e.kind == "loss_grad_report")
            .count();
        assert_eq!(reports, 8); // 2 clients per step x 4 steps
        assert_eq!(strategy.schedule().unwrap().step_count(), 4);
        assert_eq!(world.consumed_samples(), 400);
    }

    #[test]
    fn adam_state_persists_across_steps_and_iterations() {
        let mut cfg = StrategyConfig::new(StrategyKind::Proposed);
        cfg.batch_size = 60;
        cfg.parallel_window_size = 3;
        let mut world = world_from_shards(balanced_shards(3, 60), &cfg, 14);
        let mut strategy = ChunkParallel::new(cfg);
        strategy.install(&mut world).unwrap();
        strategy.run_iteration(&mut world).unwrap();
        world.reset_cursors();
        strategy.run_iteration(&mut world).unwrap();
        let steps_per_iter = strategy.schedule().unwrap().step_count() as u64;
        match &world.server.optimizer {
            Optimizer::Adam(state) => assert_eq!(state.step_count, 2 * steps_per_iter),
            _ => unreachable!(),
        }
    }
}

mod chunk_relay_behavior {
    use super::*;
    use crate::nn::OptimizerKind;

    fn paired_worlds(seed: u64) -> (World, World) {
        let a = world_from_shards(canonical_shards(), &StrategyConfig::new(StrategyKind::Proposed), seed);
        let b = world_from_shards(canonical_shards(), &StrategyConfig::new(StrategyKind::ProposedSemi), seed);
        (a, b)
    }

    #[test]
    fn relay_and_parallel_produce_identical_models() {
        let (mut parallel_world, mut relay_world) = paired_worlds(15);
        let cfg_p = StrategyConfig::new(StrategyKind::Proposed);
        let cfg_r = StrategyConfig::new(StrategyKind::ProposedSemi);
        let mut parallel = ChunkParallel::new(cfg_p);
        let mut relay = ChunkRelay::new(cfg_r);
        parallel.install(&mut parallel_world).unwrap();
        relay.install(&mut relay_world).unwrap();
        for _ in 0..3 {
            parallel.run_iteration(&mut parallel_world).unwrap();
            relay.run_iteration(&mut relay_world).unwrap();
            parallel_world.reset_cursors();
            relay_world.reset_cursors();
            assert_eq!(
                parallel_world.server.global_model.to_params(),
                relay_world.server.global_model.to_params()
            );
        }
    }

    #[test]
    fn relay_iteration_takes_at_least_as_long() {
        let (mut parallel_world, mut relay_world) = paired_worlds(16);
        let mut parallel = ChunkParallel::new(StrategyConfig::new(StrategyKind::Proposed));
        let mut relay = ChunkRelay::new(StrategyConfig::new(StrategyKind::ProposedSemi));
        parallel.install(&mut parallel_world).unwrap();
        relay.install(&mut relay_world).unwrap();
        let t_parallel = parallel.run_iteration(&mut parallel_world).unwrap();
        let t_relay = relay.run_iteration(&mut relay_world).unwrap();
        assert!(t_relay >= t_parallel, "relay {t_relay} vs parallel {t_parallel}");
    }

    #[test]
    fn single_client_steps_are_bitwise_identical_across_variants() {
        let shards = balanced_shards(1, 60);
        let mut cfg_p = StrategyConfig::new(StrategyKind::Proposed);
        cfg_p.batch_size = 60;
        cfg_p.parallel_window_size = 1;
        let mut cfg_r = StrategyConfig::new(StrategyKind::ProposedSemi);
        cfg_r.batch_size = 60;
        cfg_r.cluster_window_size = 1;
        cfg_p.optimizer = OptimizerKind::Sgd { learning_rate: 0.1 };
        cfg_r.optimizer = OptimizerKind::Sgd { learning_rate: 0.1 };
        let mut world_p = world_from_shards(shards.clone(), &cfg_p, 17);
        let mut world_r = world_from_shards(shards, &cfg_r, 17);
        let mut parallel = ChunkParallel::new(cfg_p);
        let mut relay = ChunkRelay::new(cfg_r);
        parallel.install(&mut world_p).unwrap();
        relay.install(&mut world_r).unwrap();
        parallel.run_iteration(&mut world_p).unwrap();
        relay.run_iteration(&mut world_r).unwrap();
        assert_eq!(
            world_p.server.global_model.to_params(),
            world_r.server.global_model.to_params()
        );
    }

    #[test]
    fn hosts_receive_the_final_update_duty() {
        let mut world = world_from_shards(canonical_shards(), &StrategyConfig::new(StrategyKind::ProposedSemi), 18);
        let mut relay = ChunkRelay::new(StrategyConfig::new(StrategyKind::ProposedSemi));
        relay.install(&mut world).unwrap();
        assert_eq!(relay.hosts().unwrap().hosts, vec![1, 1, 2, 3]);
        relay.run_iteration(&mut world).unwrap();
        // Each step ends with a local_model_report from its host.
        let reporters: Vec<String> = world
            .log
            .events()
            .iter()
            .filter(|e| e.kind == "local_model_report")
            .map(|e| e.from.clone())
            .collect();
        assert_eq!(
            reporters,
            vec!["client:1", "client:1", "client:2", "client:3"]
        );
    }
}

mod run_training_behavior {
    use super::*;

    fn snapshot_series(seed: u64, iterations: usize) -> Vec<RoundRecord<crate::ModelParams>> {
        let cfg = StrategyConfig::new(StrategyKind::Proposed);
        let mut world = world_from_shards(canonical_shards(), &cfg, seed);
        let mut strategy = build_strategy(&cfg).unwrap();
        run_training(strategy.as_mut(), &mut world, iterations, |m| {
            Ok(m.to_params())
        })
        .unwrap()
    }

    #[test]
    fn zero_iterations_yield_only_the_initial_record() {
        let series = snapshot_series(19, 0);
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].round, 0);
        assert_eq!(series[0].sim_time, 0.0);
    }

    #[test]
    fn series_length_is_iterations_plus_one() {
        let series = snapshot_series(20, 3);
        assert_eq!(series.len(), 4);
        assert_eq!(series.last().unwrap().round, 3);
        // Simulated time strictly increases over training rounds.
        for pair in series.windows(2) {
            assert!(pair[0].sim_time < pair[1].sim_time);
        }
    }

    #[test]
    fn same_master_seed_reproduces_the_series() {
        let a = snapshot_series(21, 3);
        let b = snapshot_series(21, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs_are_rejected_at_build_time() {
        let mut cfg = StrategyConfig::new(StrategyKind::Proposed);
        cfg.batch_size = 100;
        cfg.parallel_window_size = 3;
        assert!(matches!(build_strategy(&cfg), Err(Error::Config(_))));
    }
}

mod empty_schedule {
    use super::*;

    #[test]
    fn no_steps_leave_the_model_unchanged() {
        let cfg = StrategyConfig::new(StrategyKind::Proposed);
        let mut world = world_from_shards(canonical_shards(), &cfg, 22);
        let initial = world.server.global_model.to_params();
        let schedule = Schedule {
            chunk_size: 50,
            steps: Vec::new(),
            per_client: Vec::new(),
            warnings: Vec::new(),
        };
        let mut strategy = ChunkParallel::with_schedule(cfg, schedule);
        strategy.run_iteration(&mut world).unwrap();
        assert_eq!(world.server.global_model.to_params(), initial);
    }
}

macro_rules! example {
    ($module:ident, $file:literal, $test:ident) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(controller_design, "controller_design.rs", controller_design_runs);
example!(expected_covariance, "expected_covariance.rs", expected_covariance_runs);
example!(allocation_solvers, "allocation_solvers.rs", allocation_solvers_runs);
example!(identical_agents, "identical_agents.rs", identical_agents_runs);
example!(priority_tuning, "priority_tuning.rs", priority_tuning_runs);
example!(lossy_channel, "lossy_channel.rs", lossy_channel_runs);
example!(stability_monitor, "stability_monitor.rs", stability_monitor_runs);
example!(experiment_sweep, "experiment_sweep.rs", experiment_sweep_runs);

//! Preset output does not depend on how the batch is executed.

use rydpass::parallel::Execution;
use rydpass_cli::presets::{run_preset, PresetOptions};

#[test]
fn preset_files_are_identical_across_execution_modes() {
    for name in ["fig3a", "fig6"] {
        let run = |execution| {
            run_preset(
                name,
                &PresetOptions {
                    steps_per_us: Some(2e3),
                    execution,
                },
            )
            .unwrap()
        };
        let (seq, par) = (run(Execution::Sequential), run(Execution::Parallel));
        assert_eq!(seq, par, "{name}");
        assert!(par.last().unwrap().file_name.ends_with("_summary.json"));
    }
}

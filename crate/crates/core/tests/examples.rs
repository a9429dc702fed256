//! Every example runs to completion.

mod astar_three_stage {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/astar_three_stage.rs"));
}

mod distance_field {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/distance_field.rs"));
}

mod full_pipeline {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/full_pipeline.rs"));
}

mod optimize_sink {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/optimize_sink.rs"));
}

mod render_masks {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/render_masks.rs"));
}

mod scenario_files {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scenario_files.rs"));
}

mod self_check {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/self_check.rs"));
}

mod time_reallocation {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/time_reallocation.rs"));
}

mod voxelize {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/voxelize.rs"));
}

#[test]
fn astar_three_stage_runs() {
    astar_three_stage::run_example().unwrap();
}

#[test]
fn distance_field_runs() {
    distance_field::run_example().unwrap();
}

#[test]
fn full_pipeline_runs() {
    full_pipeline::run_example().unwrap();
}

#[test]
fn optimize_sink_runs() {
    optimize_sink::run_example().unwrap();
}

#[test]
fn render_masks_runs() {
    render_masks::run_example().unwrap();
}

#[test]
fn scenario_files_runs() {
    scenario_files::run_example().unwrap();
}

#[test]
fn self_check_runs() {
    self_check::run_example().unwrap();
}

#[test]
fn time_reallocation_runs() {
    time_reallocation::run_example().unwrap();
}

#[test]
fn voxelize_runs() {
    voxelize::run_example().unwrap();
}

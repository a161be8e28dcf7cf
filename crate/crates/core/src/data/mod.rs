//! Trajectory ingestion: CSV recordings, scene windowing and normalization,
//! deterministic splits, scripted synthetic scenes and the scene cache.

pub mod cache;
pub mod records;
pub mod scene;
pub mod split;
pub mod synth;
pub mod windowing;

pub use cache::{load_scene_cache, save_scene_cache};
pub use records::{load_trajectories, write_trajectories, Recording, TrajectoryFormat, TrajectoryRecord};
pub use scene::{NormalizationFrame, Scene};
pub use split::{split, SplitSpec};
pub use synth::{generate_corpus, simulate, synth_scenario, CorpusSpec, ScenarioSpec, SynthOutput};
pub use windowing::{build_scenes, denormalize, SceneBuild, SceneConfig};

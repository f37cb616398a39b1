//! Narrative understanding: turns raw provider output into corrected
//! dialogue, characters, scenes and narration.

pub mod caption;
pub mod characters;
pub mod dialogue;
pub mod faces;
pub mod memory;
pub mod pipeline;
pub mod provider;
pub mod result_block;
pub mod segmentation;
pub mod speakers;

pub use caption::{caption_scene, CaptionError, SceneRef};
pub use dialogue::{correct_dialogue, CorrectionRejected};
pub use faces::cluster_faces;
pub use memory::{memory_get_context, ContextBundle, MemoryStore};
pub use pipeline::{understand_series, EpisodeInput, SeriesUnderstanding, UnderstandConfig};
pub use provider::{ChatProvider, ChatRequest, ProviderError, ProviderSuite};
pub use result_block::{parse_result_block, ParseError, RecordSchema, ResultBlock};
pub use segmentation::segment_scenes;
pub use speakers::{fuse_speaker_votes, SpeakerVote};

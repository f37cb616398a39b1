use std::path::PathBuf;

use storycut_core::editing::Audience;
use storycut_core::io::manifest::parse_manifest;
use storycut_core::io::{load_manifest, IoError, SceneManifest};
use storycut_core::sample::{sample_durations, sample_series, SAMPLE_TITLE};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/sample_manifest.json")
}

fn expected() -> SceneManifest {
    let mut m = SceneManifest::from_sequence(
        SAMPLE_TITLE,
        Audience::Female,
        &sample_durations(),
        &sample_series(),
        false,
    );
    for ep in &mut m.episodes {
        ep.source = Some(format!("episode-{:02}.mp4", ep.episode_id));
    }
    m
}

/// Set STORYCUT_WRITE_FIXTURES=1 to regenerate after changing the sample.
#[test]
fn shipped_manifest_matches_the_sample() {
    let path = fixture();
    if std::env::var_os("STORYCUT_WRITE_FIXTURES").is_some() {
        storycut_core::io::save_manifest(&path, &expected()).unwrap();
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, expected().to_json());
}

#[test]
fn shipped_manifest_has_ten_scenes() {
    let m = load_manifest(&fixture()).unwrap();
    let seq = m.to_sequence();
    assert_eq!(seq.len(), 10);
    assert_eq!(seq.global_index(2, 1), Some(7));
    assert_eq!(seq.global_index(2, 4), Some(10));
    assert!(!m.has_scores());
}

#[test]
fn one_millisecond_gap_is_rejected() {
    let mut m = expected();
    let s = &mut m.episodes[0].scenes[1];
    s.start_ms += 1;
    let err = parse_manifest(&fixture(), &m.to_json()).unwrap_err();
    assert!(
        matches!(err, IoError::Schema { ref pointer, .. } if pointer == "/episodes/0/scenes/1/start_ms")
    );
}

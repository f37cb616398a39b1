//! Scene listings for the editing prompts.

use crate::model::SceneSequence;

/// Renders global indices `indices` as one line each:
/// `Episode 1, Scene 3 <Highlight>: narration`.
pub fn scene_lines(
    scenes: &SceneSequence,
    indices: impl IntoIterator<Item = usize>,
    tags: impl Fn(usize) -> Vec<&'static str>,
) -> String {
    let mut out = String::new();
    for i in indices {
        let s = scenes.get(i);
        let labels: String = tags(i).iter().map(|t| format!(" <{t}>")).collect();
        out.push_str(&format!(
            "Episode {}, Scene {}{}: {}\n",
            s.episode_id,
            s.scene_id,
            labels,
            s.narration.trim()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Scene, TimeInterval};

    #[test]
    fn renders_tags_in_order() {
        let seq = SceneSequence::new(vec![
            Scene::new(TimeInterval::new(1, 0, 10).unwrap(), 1, "a"),
            Scene::new(TimeInterval::new(1, 10, 20).unwrap(), 2, " b "),
        ])
        .unwrap();
        let text = scene_lines(&seq, 1..=2, |i| {
            if i == 2 {
                vec!["Highlight", "Optional End"]
            } else {
                vec![]
            }
        });
        assert_eq!(
            text,
            "Episode 1, Scene 1: a\nEpisode 1, Scene 2 <Highlight> <Optional End>: b\n"
        );
    }
}

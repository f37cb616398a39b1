//! A small two-episode series with known highlight scores, used by tests,
//! fixtures and the documentation.
//!
//! Episode 1 has six scenes and episode 2 has four, so global indices run
//! 1 to 10. Scored, the series holds two highlight clips: scenes 4 to 6
//! (3 + 4 + 2 = 9) and scenes 8 to 9 (2 + 3 = 5).

use crate::model::{Scene, SceneSequence, TimeInterval};

pub const SAMPLE_TITLE: &str = "The Hidden Heir";

/// Scores by global index.
pub const SAMPLE_SCORES: [u32; 10] = [0, 0, 0, 3, 4, 2, 0, 2, 3, 0];

const EPISODES: [(u32, &[(u64, &str)]); 2] = [
    (
        1,
        &[
            (12_000, "Lin Xia arrives at the company for her first day as an assistant."),
            (9_000, "A colleague warns her about the cold new CEO."),
            (15_000, "Lin Xia spills coffee in the lobby while rushing to a meeting."),
            (20_000, "Lin Xia collides with the CEO, who turns out to be the stranger she insulted the night before."),
            (18_000, "The CEO's fiancee slaps Lin Xia in front of the staff and accuses her of scheming."),
            (14_000, "The CEO steps in and announces that Lin Xia is under his protection."),
        ],
    ),
    (
        2,
        &[
            (11_000, "Lin Xia goes home and tells her roommate about the day."),
            (22_000, "An old man Lin Xia helped on the street reveals he is the CEO's grandfather."),
            (16_000, "The grandfather declares Lin Xia the heir to the family fortune at dinner."),
            (13_000, "The fiancee overhears and makes a phone call to a mysterious man."),
        ],
    ),
];

/// The sample series, unscored.
pub fn sample_series() -> SceneSequence {
    let mut scenes = Vec::new();
    for (episode_id, rows) in EPISODES {
        let mut t = 0;
        for (i, (len, narration)) in rows.iter().enumerate() {
            let interval = TimeInterval::new(episode_id, t, t + len).expect("positive length");
            scenes.push(Scene::new(interval, i as u32 + 1, *narration));
            t += len;
        }
    }
    SceneSequence::new(scenes).expect("sample series is valid")
}

/// The sample series with [`SAMPLE_SCORES`] applied.
pub fn sample_scored() -> SceneSequence {
    sample_series().with_scores(&SAMPLE_SCORES)
}

/// Sample episode lengths in milliseconds.
pub fn sample_durations() -> Vec<(u32, u64)> {
    EPISODES
        .iter()
        .map(|(ep, rows)| (*ep, rows.iter().map(|(len, _)| len).sum()))
        .collect()
}

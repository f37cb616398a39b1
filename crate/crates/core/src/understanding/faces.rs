//! Greedy online clustering of face embeddings into identities.

use thiserror::Error;

/// Allowed deviation of an embedding's L2 norm from 1.
pub const NORM_TOLERANCE: f32 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaceError {
    #[error("embedding {index} is not L2-normalized (norm {norm})")]
    NotNormalized { index: usize, norm: f32 },
    #[error("embedding {index} has dimension {found}, expected {expected}")]
    Dimension {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("similarity threshold {0} must lie in (0, 1)")]
    Threshold(f32),
}

pub fn l2_norm(v: &[f32]) -> f32 {
    v.iter().map(|x| x * x).sum::<f32>().sqrt()
}

pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

/// Assigns each embedding, in input order, to the existing cluster whose
/// centroid is most similar if that similarity reaches
/// `similarity_threshold`, otherwise opens a new cluster. Returns dense
/// cluster ids in order of first appearance.
pub fn cluster_faces(
    embeddings: &[Vec<f32>],
    similarity_threshold: f32,
) -> Result<Vec<usize>, FaceError> {
    if !(similarity_threshold > 0.0 && similarity_threshold < 1.0) {
        return Err(FaceError::Threshold(similarity_threshold));
    }
    let dim = embeddings.first().map_or(0, Vec::len);
    for (index, e) in embeddings.iter().enumerate() {
        if e.len() != dim {
            return Err(FaceError::Dimension {
                index,
                found: e.len(),
                expected: dim,
            });
        }
        let norm = l2_norm(e);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(FaceError::NotNormalized { index, norm });
        }
    }

    // Centroids are kept as running sums; cosine ignores the scale.
    let mut sums: Vec<Vec<f32>> = Vec::new();
    let mut assignment = Vec::with_capacity(embeddings.len());
    for e in embeddings {
        let best = sums
            .iter()
            .enumerate()
            .map(|(id, c)| (id, cosine(e, c)))
            .filter(|(_, sim)| *sim >= similarity_threshold)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let id = match best {
            Some((id, _)) => {
                sums[id].iter_mut().zip(e).for_each(|(c, x)| *c += x);
                id
            }
            None => {
                sums.push(e.clone());
                sums.len() - 1
            }
        };
        assignment.push(id);
    }
    Ok(assignment)
}

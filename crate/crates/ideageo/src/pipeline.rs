//! Fixed-order orchestration of the analysis stages. The CLI and the
//! synthetic generator both go through these functions, so a session
//! processed twice with the same configuration yields identical numbers.

use thiserror::Error;

use crate::allocation::BackgroundProfile;
use crate::analytics::{
    compare_groups, daily_average_distance, daily_counts, pca_fit, AnalyticsError, IdeaRecord,
    Projection,
};
use crate::corpus::{tokenize, Document};
use crate::embedding::{
    infer_vector, train, EmbeddingConfig, EmbeddingError, EmbeddingModel, DEFAULT_INFER_RATE,
    DEFAULT_INFER_STEPS,
};
use crate::geography::{best_design, GeographyError, ScoredDesign};
use crate::session_io::{
    BestDesignReport, ComparisonReport, GroupReport, PointReport, ProjectionReport, Session,
    SessionReport, SessionSummary, REPORT_SCHEMA_VERSION,
};

/// Document id prefix for daily posts.
pub const POST_DOC_PREFIX: &str = "post:";
/// Document id prefix for final designs.
pub const FINAL_DOC_PREFIX: &str = "final:";
/// Document id prefix for participant backgrounds.
pub const BACKGROUND_DOC_PREFIX: &str = "bg:";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Geography(#[from] GeographyError),
}

/// The training corpus of a session: all posts, all final-design texts,
/// then all participant backgrounds, in file order. Posts and final ideas
/// share the model so both carry trained vectors in the same space.
pub fn session_documents(session: &Session) -> Vec<Document> {
    let mut docs = Vec::with_capacity(
        session.posts.len() + session.final_designs.len() + session.participants.len(),
    );
    for post in &session.posts {
        docs.push(Document::new(
            format!("{POST_DOC_PREFIX}{}", post.id),
            &post.text,
        ));
    }
    for design in &session.final_designs {
        docs.push(Document::new(
            format!("{FINAL_DOC_PREFIX}{}", design.id),
            &design.text,
        ));
    }
    for participant in &session.participants {
        docs.push(Document::new(
            format!("{BACKGROUND_DOC_PREFIX}{}", participant.participant_id),
            &participant.raw_text,
        ));
    }
    docs
}

/// Trains the session embedding model on posts plus backgrounds.
pub fn embed_session(
    session: &Session,
    config: &EmbeddingConfig,
) -> Result<EmbeddingModel, PipelineError> {
    Ok(train(&session_documents(session), config)?)
}

/// Participant profiles with background vectors read from the trained model.
pub fn background_profiles(
    session: &Session,
    model: &EmbeddingModel,
) -> Result<Vec<BackgroundProfile>, PipelineError> {
    session
        .participants
        .iter()
        .map(|p| {
            let doc_id = format!("{BACKGROUND_DOC_PREFIX}{}", p.participant_id);
            let vector = model.document_vector(&doc_id)?.to_vec();
            Ok(BackgroundProfile {
                background_vector: vector,
                ..p.clone()
            })
        })
        .collect()
}

/// Everything cmd-analyze derives from a session and its model.
#[derive(Debug, Clone)]
pub struct SessionAnalysis {
    pub report: SessionReport,
    /// Final designs with projected points, ready for terrain construction.
    pub final_designs: Vec<ScoredDesign>,
    pub projection: Option<Projection>,
}

/// Runs the full analysis: post vectors from the model, final-design vectors
/// by inference, a joint PCA projection, per-group series, group
/// comparisons, and best designs.
pub fn analyze_session(
    session: &Session,
    model: &EmbeddingModel,
) -> Result<SessionAnalysis, PipelineError> {
    let membership = session.membership();
    let group_of = |pid: &str| membership.get(pid).copied().unwrap_or(0);

    let ideas: Vec<IdeaRecord> = session
        .posts
        .iter()
        .map(|post| {
            let vector = model
                .document_vector(&format!("{POST_DOC_PREFIX}{}", post.id))?
                .to_vec();
            Ok(IdeaRecord {
                id: post.id.clone(),
                participant_id: post.participant_id.clone(),
                group: group_of(&post.participant_id),
                day: post.day,
                text: post.text.clone(),
                vector,
            })
        })
        .collect::<Result<_, EmbeddingError>>()?;

    // Final designs trained with the model keep their trained vectors;
    // designs unknown to the model (e.g. a model from another corpus cut)
    // fall back to inference.
    let final_vectors: Vec<Vec<f64>> = session
        .final_designs
        .iter()
        .map(|d| {
            match model.document_vector(&format!("{FINAL_DOC_PREFIX}{}", d.id)) {
                Ok(v) => Ok(v.to_vec()),
                Err(EmbeddingError::UnknownDocument(_)) => {
                    let tokens = tokenize(&d.text);
                    infer_vector(model, &tokens, DEFAULT_INFER_STEPS, DEFAULT_INFER_RATE)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, EmbeddingError>>()?;

    // One projection per session, fitted jointly on all idea vectors.
    let mut all_vectors: Vec<Vec<f64>> = ideas.iter().map(|i| i.vector.clone()).collect();
    all_vectors.extend(final_vectors.iter().cloned());
    let projection = if all_vectors.len() >= 2 {
        Some(pca_fit(&all_vectors, 2)?)
    } else {
        None
    };
    let (post_points, final_points) = match &projection {
        Some(p) => {
            let (posts, finals) = p.points.split_at(ideas.len());
            (posts.to_vec(), finals.to_vec())
        }
        None => (
            vec![vec![0.0, 0.0]; ideas.len()],
            vec![vec![0.0, 0.0]; session.final_designs.len()],
        ),
    };

    let final_designs: Vec<ScoredDesign> = session
        .final_designs
        .iter()
        .zip(&final_points)
        .map(|(d, point)| {
            ScoredDesign::new(
                d.id.clone(),
                d.participant_id.clone(),
                group_of(&d.participant_id),
                [point[0], point[1]],
                d.scores.clone(),
            )
        })
        .collect::<Result<_, GeographyError>>()?;

    let condition_of = |group_id: usize| {
        session
            .group(group_id)
            .map(|g| g.condition.to_string())
            .unwrap_or_else(|| "ungrouped".into())
    };
    let best_report = |d: &ScoredDesign| BestDesignReport {
        design_id: d.design_id.clone(),
        participant_id: d.participant_id.clone(),
        group: d.group,
        condition: condition_of(d.group),
        mean_score: d.mean_score,
    };

    let counts = daily_counts(&ideas, session.days);
    let mut group_reports = Vec::with_capacity(session.groups.len());
    let mut series_by_group = Vec::new();
    for group in &session.groups {
        let series = daily_average_distance(&ideas, group.id, session.days);
        let group_designs: Vec<&ScoredDesign> =
            final_designs.iter().filter(|d| d.group == group.id).collect();
        let best = group_designs
            .iter()
            .map(|d| (*d).clone())
            .collect::<Vec<_>>();
        let group_best = best_design(&best).ok().map(best_report);
        group_reports.push(GroupReport {
            group: group.id,
            condition: group.condition.to_string(),
            members: group.members.len(),
            daily_counts: counts
                .get(&group.id)
                .cloned()
                .unwrap_or_else(|| vec![0; session.days]),
            daily_average_distance: series.clone(),
            final_designs: group_designs.len(),
            best_design: group_best,
        });
        series_by_group.push((group.id, series));
    }

    let mut comparisons = Vec::new();
    for i in 0..series_by_group.len() {
        for j in (i + 1)..series_by_group.len() {
            let (ga, sa) = &series_by_group[i];
            let (gb, sb) = &series_by_group[j];
            if let Ok(result) = compare_groups(sa, sb) {
                comparisons.push(ComparisonReport {
                    group_a: *ga,
                    group_b: *gb,
                    statistic: result.statistic,
                    p_value: result.p_value,
                    method: result.method,
                });
            }
        }
    }

    let projection_report = ProjectionReport {
        eigenvalues: projection
            .as_ref()
            .map(|p| p.eigenvalues.clone())
            .unwrap_or_default(),
        posts: ideas
            .iter()
            .zip(&post_points)
            .map(|(idea, pt)| PointReport {
                id: idea.id.clone(),
                participant_id: idea.participant_id.clone(),
                group: idea.group,
                day: Some(idea.day),
                x: pt[0],
                y: pt[1],
                mean_score: None,
            })
            .collect(),
        final_designs: final_designs
            .iter()
            .map(|d| PointReport {
                id: d.design_id.clone(),
                participant_id: d.participant_id.clone(),
                group: d.group,
                day: None,
                x: d.point[0],
                y: d.point[1],
                mean_score: Some(d.mean_score),
            })
            .collect(),
    };

    let overall_best = best_design(&final_designs).ok().map(best_report);

    let report = SessionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        session: SessionSummary {
            name: session.name.clone(),
            task: session.task.clone(),
            days: session.days,
            participants: session.participants.len(),
        },
        groups: group_reports,
        comparisons,
        projection: projection_report,
        best_design: overall_best,
        terrain: None,
    };

    Ok(SessionAnalysis {
        report,
        final_designs,
        projection,
    })
}

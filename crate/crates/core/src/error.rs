use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("duplicate frame id {0:?}")]
    DuplicateFrameId(String),
    #[error("frame {0:?} has an empty label set")]
    EmptyLabelSet(String),
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("score for frame {0:?} is not a finite number")]
    InvalidScore(String),
    #[error("no prediction for ground-truth frame {0:?}")]
    MissingPrediction(String),
    #[error("prediction for frame {0:?} which is not in the ground truth")]
    UnknownFrame(String),
    #[error("duplicate prediction for frame {0:?}")]
    DuplicatePrediction(String),
    #[error("frame {frame_id:?} belongs to video {truth:?} but was predicted under {predicted:?}")]
    VideoMismatch {
        frame_id: String,
        truth: String,
        predicted: String,
    },
    #[error("video {0:?} has no ground-truth frames")]
    UnknownVideo(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

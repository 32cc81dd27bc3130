use thiserror::Error;

use crate::catalog::OutOfBounds;
use crate::ids::{ClipId, DeviceId, WallId};

/// Errors raised by device-level operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("unknown clip {0}")]
    UnknownClip(ClipId),
    #[error("unknown wall {0}")]
    UnknownWall(WallId),
    #[error("no personal clip is playing")]
    NotPlaying,
    #[error("message from {got}, expected paired peer {expected}")]
    WrongSender { expected: DeviceId, got: DeviceId },
    #[error("position {position_ms} ms is outside clip {clip_id}")]
    InvalidPosition { clip_id: ClipId, position_ms: u64 },
    #[error(transparent)]
    OutOfBounds(#[from] OutOfBounds),
}

use crate::ids::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown or dead node {0}")]
    UnknownNode(NodeId),

    #[error("repair of failed node {failed} exhausted: no replacement found")]
    RepairExhausted { failed: NodeId },

    #[error("ring broken: node {at} departed during the walk")]
    RingBroken { at: NodeId },

    #[error("return path stranded at {at}: no alive neighbor closer to the source")]
    ReturnStranded { at: NodeId },

    #[error("promotion impossible: super-peer {0} has no promotable sub-peer")]
    PromotionImpossible(NodeId),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

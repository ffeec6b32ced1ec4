use thiserror::Error;

use crate::dropoutnet::NetError;
use crate::meshing::MeshError;
use crate::planner::PlanError;
use crate::simlab::SimError;
use crate::voxelgrid::VoxelError;
use crate::wrench::WrenchError;

/// Crate-wide error, wrapping each module's own error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Wrench(#[from] WrenchError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn format(path: impl AsRef<std::path::Path>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! The classifier: tensor type, layers, Adam, the fixed architecture,
//! training and model files.

pub mod adam;
pub mod io;
pub mod layers;
pub mod model;
pub mod tensor;
pub mod train;

pub use adam::AdamState;
pub use layers::{relu, relu_backward, softmax_cross_entropy, ConvGrads, ConvLayer, DenseGrads, DenseLayer};
pub use model::{predict, CnnModel, ForwardTrace, ModelGrads, ModelMeta, INPUT_SHAPE, SHAPE_CHAIN};
pub use tensor::{Shape3, Tensor3};
pub use train::{train, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },
    #[error("shape chain broken after layer {stage}: expected {expected}, got {got}")]
    ShapeChain {
        stage: usize,
        expected: Shape3,
        got: Shape3,
    },
    #[error("non-finite logits")]
    NonFiniteLogits,
    #[error("unknown class index {0}")]
    UnknownClass(usize),
    #[error("training set contains a single class")]
    SingleClass,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("parameter and gradient groups do not match the optimizer state")]
    ParamMismatch,
}

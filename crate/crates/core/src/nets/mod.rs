//! Networks, losses, optimizers and training loops.

pub mod losses;
pub mod model;
pub mod optim;
pub mod train;

pub use losses::{class_gradient, class_objective, class_probabilities, gan_balance, gan_losses, ClassGradient, GanBalanceState};
pub use model::{mlp, Activation, LayerSpec, ModelBundle, ParamMode};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use train::{
    dae_score, train_classifier, train_dae, train_generator, FeatureMatch, GeneratorConfig, GeneratorMode, NoiseSigmas,
    TrainConfig, TAP_H, TAP_H1,
};

//! The plane-wave GAN: generator and discriminator networks, spectral
//! normalization, RaGAN training on synthetic random-wave fields, MMD
//! monitoring, and the WDC/RRIC compressive-sensing diagnostics.

pub mod diagnostics;
pub mod loss;
pub mod mmd;
pub mod net;
pub mod train;

pub use diagnostics::{rric_discrepancy, wdc_discrepancy};
pub use loss::{ragan_losses, sigmoid};
pub use mmd::{median_heuristic_gamma, mmd, mmd_unbiased};
pub use net::{
    discriminator_forward, generator_forward, DiscArch, Discriminator, GenArch, Generator,
};
pub use train::{
    evaluate_mmd, load_checkpoint, save_checkpoint, train_gan, Checkpoint, IterRecord,
    TrainConfig, TrainOutput, TrainTrace,
};

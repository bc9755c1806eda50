//! Teacher extraction, label-free student training and evaluation.
//!
//! The teacher runs once per stored (sample, epoch) slot and its top-k output
//! is written to a logit store together with the slot's augmentation seed.
//! Training reads only the store and the audio: the student's input for a slot
//! is regenerated from the stored seed, so it sees the same view the teacher
//! labelled.

pub mod experiment;
pub mod extract;
pub mod loss;
pub mod metrics;
pub mod schedule;
pub mod student;
pub mod synthetic;
pub mod teacher;
pub mod train;
pub mod views;

pub use extract::{extract, slot_seed, verify, ExtractOptions, ExtractSummary, StoreMeta, VerifyReport};
pub use loss::{sparse_bce, sparse_bce_grad, SparseTarget, PROB_CLAMP};
pub use metrics::{average_precision, mean_average_precision, EvalResult};
pub use schedule::{lr_schedule, WarmupCosine};
pub use student::{Adam, InputNorm, StudentModel};
pub use synthetic::{evaluate, EvalLabels, SyntheticTask};
pub use teacher::{class_band, TeacherEnsemble, TeacherSpec};
pub use train::{train, TrainReport, TrainingConfig, TrainingData, TrainingView};
pub use views::{StudentView, ViewCache};

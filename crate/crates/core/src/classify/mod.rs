//! SVM classification of concept-map propositions from their embeddings.

pub mod cv;
pub mod kernel;
pub mod pipeline;
pub mod smo;
pub mod svm;

pub use cv::{stratified_folds, CvPlan};
pub use kernel::{Gram, Kernel, KernelRegistry, KernelSpec, LinearKernel, RbfKernel};
pub use pipeline::{
    check_inputs, l2_normalize, nested_cv, plan_for, run_pipeline, ClassifierReport, Dataset,
    FoldResult, GammaSpec, HyperGrid, NestedCv, CLASSIFIER_SCHEMA, DEFAULT_FOLDS,
};
pub use smo::{DualSolution, KernelMatrix, SolverConfig};
pub use svm::{predict, train_svm, train_svm_with, BinaryMachine, SvmModel};

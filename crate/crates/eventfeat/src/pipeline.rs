//! Accumulate, learn a basis, encode, train the classifier, evaluate.

use std::time::Instant;

use eventfeat_core::classifier::{self, LinearSvmModel};
use eventfeat_core::direct::train_direct;
use eventfeat_core::features::{encode_recording, BasisView, Encoder, FeatureVector};
use eventfeat_core::inverse::train_inverse;
use eventfeat_core::trace::TraceEntry;
use eventfeat_core::volumes::{accumulate, normalize_in_place, sample_random_volumes, AccumulatedGrid, AccumulationConfig};
use eventfeat_core::whitening::fit_whitening;
use eventfeat_core::Matrix;
use rayon::prelude::*;

use crate::config::{EncoderKind, Formulation, PipelineConfig};
use crate::container::{Basis, ModelContainer};
use crate::dataset::{Dataset, Recording};
use crate::error::{HarnessError, Result};
use crate::feature_file::FeatureSet;

const SAMPLE_SALT: u64 = 0x5A3B_1E01;
const LEARN_SALT: u64 = 0x1EA2_0002;
const CV_SALT: u64 = 0xC0F0_1D03;

pub fn accumulate_all(recordings: &[Recording], config: &AccumulationConfig) -> Vec<AccumulatedGrid> {
    recordings.par_iter().map(|r| accumulate(&r.stream, config).grid).collect()
}

pub fn labels(recordings: &[Recording]) -> Vec<u32> {
    recordings.iter().map(|r| r.label).collect()
}

#[derive(Debug, Clone)]
pub struct LearnedBasis {
    pub model: ModelContainer,
    pub trace: Vec<TraceEntry>,
}

/// Samples volumes from the training grids, normalizes and whitens them and
/// trains the configured learner.
pub fn learn_basis(cfg: &PipelineConfig, grids: &[AccumulatedGrid]) -> Result<LearnedBasis> {
    let acc = cfg.accumulation();
    let mut volumes: Vec<Vec<f64>> = sample_random_volumes(grids, &acc, cfg.sample_count, cfg.seed ^ SAMPLE_SALT)?
        .into_iter()
        .map(|v| v.data)
        .collect();
    volumes
        .par_iter_mut()
        .for_each(|v| normalize_in_place(v, cfg.normalize_epsilon));
    let whitening = fit_whitening(&volumes, cfg.whitening_epsilon)?;
    let d = acc.volume_dim();
    let mut columns = Matrix::zeros(d, volumes.len());
    for (j, v) in volumes.iter().enumerate() {
        columns.column_mut(j).copy_from_slice(v);
    }
    let white = whitening.apply_columns(&columns)?;
    let seed = cfg.seed ^ LEARN_SALT;
    let (basis, trace) = match cfg.formulation {
        Formulation::Inverse => {
            let m = train_inverse(&white, &cfg.inverse_hyper(), seed)?;
            (Basis::Inverse(m.dictionary), m.trace)
        }
        Formulation::Direct => {
            let m = train_direct(&white, &cfg.direct_hyper(), seed)?;
            (Basis::Direct(m.transform), m.trace)
        }
    };
    Ok(LearnedBasis {
        model: ModelContainer {
            config: cfg.clone(),
            whitening,
            basis,
            svm: None,
        },
        trace,
    })
}

pub fn encoder_for(model: &ModelContainer) -> Result<Encoder> {
    let cfg = &model.config;
    Ok(match (&model.basis, cfg.encoder) {
        (Basis::Inverse(d), EncoderKind::Triangle) => Encoder::Triangle(BasisView::from_dictionary(d)?),
        (Basis::Direct(t), EncoderKind::Triangle) => Encoder::Triangle(BasisView::from_transform(t)?),
        (Basis::Inverse(d), EncoderKind::Native) => Encoder::NativeInverse {
            dictionary: d.clone(),
            hyper: cfg.inverse_hyper(),
        },
        (Basis::Direct(t), EncoderKind::Native) => Encoder::NativeDirect {
            transform: t.clone(),
            lambda0: cfg.direct.lambda0,
        },
    })
}

/// Pooled features for each grid, in input order.
pub fn encode_grids(model: &ModelContainer, grids: &[AccumulatedGrid], labels: &[u32]) -> Result<Vec<FeatureVector>> {
    let encoder = encoder_for(model)?;
    let acc = model.config.accumulation();
    let eps = model.config.normalize_epsilon;
    grids
        .par_iter()
        .zip(labels.par_iter())
        .map(|(g, &label)| {
            let mut f = encode_recording(&encoder, &model.whitening, g, &acc, eps)?;
            f.label = Some(label);
            Ok(f)
        })
        .collect()
}

/// Picks the regularization constant by cross-validation, then refits on
/// all of `features`.
pub fn train_classifier(cfg: &PipelineConfig, features: &[FeatureVector]) -> Result<LinearSvmModel> {
    let c = classifier::cross_validate(features, &cfg.svm_grid, cfg.svm_folds, cfg.seed ^ CV_SALT)?;
    Ok(classifier::train_svm(features, c)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub predictions: Vec<u32>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn from_predictions(truth: &[u32], predictions: Vec<u32>, num_classes: usize) -> Self {
        let mut confusion = vec![vec![0; num_classes]; num_classes];
        let mut correct = 0;
        for (&t, &p) in truth.iter().zip(&predictions) {
            confusion[t as usize][p as usize] += 1;
            correct += (t == p) as usize;
        }
        let accuracy = if truth.is_empty() { 0.0 } else { correct as f64 / truth.len() as f64 };
        Self {
            accuracy,
            predictions,
            confusion,
        }
    }

    pub fn class_accuracy(&self, class: usize) -> Option<f64> {
        let row = &self.confusion[class];
        let n: usize = row.iter().sum();
        (n > 0).then(|| row[class] as f64 / n as f64)
    }
}

pub fn evaluate(svm: &LinearSvmModel, features: &[FeatureVector], num_classes: usize) -> Result<Evaluation> {
    let truth: Vec<u32> = features
        .iter()
        .map(|f| f.label.ok_or_else(|| HarnessError::Data("test feature without a label".into())))
        .collect::<Result<_>>()?;
    if let Some(&bad) = truth.iter().chain(&svm.classes).find(|&&l| l as usize >= num_classes) {
        return Err(HarnessError::Data(format!("label {bad} outside the {num_classes} dataset classes")));
    }
    let predictions = classifier::predict_batch(svm, features)?;
    Ok(Evaluation::from_predictions(&truth, predictions, num_classes))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub model: ModelContainer,
    pub features: FeatureSet,
    pub evaluation: Evaluation,
    pub trace: Vec<TraceEntry>,
    pub seconds: f64,
}

/// The whole pipeline on an already loaded dataset.
pub fn run(cfg: &PipelineConfig, data: &Dataset) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let acc = cfg.accumulation();
    let train_grids = accumulate_all(&data.train, &acc);
    let test_grids = accumulate_all(&data.test, &acc);
    let LearnedBasis { mut model, trace } = learn_basis(cfg, &train_grids)?;
    let features = FeatureSet {
        classes: data.classes.clone(),
        train: encode_grids(&model, &train_grids, &labels(&data.train))?,
        test: encode_grids(&model, &test_grids, &labels(&data.test))?,
    };
    let svm = train_classifier(cfg, &features.train)?;
    let evaluation = evaluate(&svm, &features.test, data.classes.len())?;
    model.svm = Some(svm);
    Ok(RunOutput {
        model,
        features,
        evaluation,
        trace,
        seconds: start.elapsed().as_secs_f64(),
    })
}

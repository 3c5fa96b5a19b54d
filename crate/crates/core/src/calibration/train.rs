use std::io::Write;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{model_error, AmsGrad, AmsGradConfig, TrainingSample};
use crate::coupling::CouplingModel;
use crate::error::{Error, Result};
use crate::junction::fluxes_to_coupling_data;
use crate::ml::{squared_error, Evaluation, MlCouplingModel};

/// Epochs after which the losses are evaluated. Epoch 0 is the untrained
/// model.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalSchedule {
    EveryEpoch,
    Epochs(Vec<usize>),
}

impl EvalSchedule {
    fn contains(&self, epoch: usize, last: usize) -> bool {
        match self {
            Self::EveryEpoch => true,
            Self::Epochs(e) => e.contains(&epoch) || epoch == last,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    /// Consistency penalty on the training set, for penalized training.
    pub penalty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub history: Vec<LossRecord>,
}

impl TrainingReport {
    pub fn last(&self) -> Option<&LossRecord> {
        self.history.last()
    }

    pub fn at_epoch(&self, epoch: usize) -> Option<&LossRecord> {
        self.history.iter().find(|r| r.epoch == epoch)
    }

    /// CSV with header `epoch,train_loss,test_loss,penalty`; missing values
    /// are empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.history {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean over the samples of the squared flux error averaged over the roads.
pub fn dataset_loss<M: CouplingModel + ?Sized>(model: &M, samples: &[TrainingSample]) -> Result<f64> {
    Ok(model_error(model, samples)?.total)
}

/// Mean over the batch of the squared flux difference between the model on
/// its inputs and the model on the coupling data of its own outputs.
pub fn consistency_penalty<M: CouplingModel + ?Sized>(
    model: &M,
    batch: &[TrainingSample],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::domain("penalty over an empty batch"));
    }
    let fds = model.junction_diagrams()?;
    let mut sum = 0.0;
    for s in batch {
        let f0 = model.fluxes(&s.traces)?;
        let rho0 = fluxes_to_coupling_data(&fds, &s.traces, &f0)?;
        let f1 = model.fluxes(&rho0)?;
        sum += squared_error(&f0, &f1).0;
    }
    Ok(sum / batch.len() as f64)
}

/// Trains with shuffled mini-batches and AMSGrad. With `consistency` the
/// cost is the flux error plus `penalty_weight` times the consistency
/// penalty; the coupling data entering the penalty is held fixed when
/// differentiating.
pub fn train_ml(
    model: &mut MlCouplingModel,
    train: &[TrainingSample],
    test: &[TrainingSample],
    config: &AmsGradConfig,
    consistency: bool,
    schedule: &EvalSchedule,
) -> Result<TrainingReport> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::domain("no training samples"));
    }
    if consistency != model.variant().consistency_training() {
        return Err(Error::contract(format!(
            "{} is {}trained with the consistency penalty",
            model.variant(),
            if consistency { "not " } else { "" }
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = AmsGrad::new(config, model.parameter_count());
    let mut report = TrainingReport::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grad = vec![0.0; model.parameter_count()];
    let mut eval = Evaluation::default();
    let mut eval0 = Evaluation::default();
    let fds = *model.diagrams();

    let record = |model: &MlCouplingModel, epoch: usize, report: &mut TrainingReport| -> Result<()> {
        let train_loss = dataset_loss(model, train)?;
        if !train_loss.is_finite() {
            return Err(Error::Numerical(format!("training loss is {train_loss} at epoch {epoch}")));
        }
        let test_loss = if test.is_empty() {
            None
        } else {
            Some(dataset_loss(model, test)?)
        };
        let penalty = if consistency {
            Some(consistency_penalty(model, train)?)
        } else {
            None
        };
        info!(
            "{} epoch {epoch}: train {train_loss:.4e} test {:?} penalty {:?}",
            model.variant(),
            test_loss,
            penalty
        );
        report.history.push(LossRecord {
            epoch,
            train_loss,
            test_loss,
            penalty,
        });
        Ok(())
    };

    if schedule.contains(0, config.epochs) {
        record(model, 0, &mut report)?;
    }
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            let mut loss = 0.0;
            for &i in chunk {
                let s = &train[i];
                model.evaluate_into(&s.traces, &mut eval)?;
                let (l, mut fg) = squared_error(&eval.fluxes, &s.target);
                loss += l * scale;
                fg = fg.map(|v| v * scale);
                if consistency {
                    let rho0 = fluxes_to_coupling_data(&fds, &s.traces, &eval.fluxes)?;
                    model.evaluate_into(&rho0, &mut eval0)?;
                    let (p, pg) = squared_error(&eval.fluxes, &eval0.fluxes);
                    let w = config.penalty_weight * scale;
                    loss += p * w;
                    for k in 0..3 {
                        fg[k] += pg[k] * w;
                    }
                    model.accumulate_gradient(&mut eval0, pg.map(|v| -v * w), &mut grad);
                }
                model.accumulate_gradient(&mut eval, fg, &mut grad);
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite loss or gradient in epoch {epoch}, batch {b}"
                )));
            }
            opt.step(model.network_mut().params_mut(), &grad);
        }
        if schedule.contains(epoch, config.epochs) {
            record(model, epoch, &mut report)?;
        }
    }
    Ok(report)
}

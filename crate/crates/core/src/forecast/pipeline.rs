use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{
    build_windows, fit_scaler, predict, train, FeatureSet, FeatureTable, LstmModel, Prediction,
    Scaler, SplitRanges, TrainConfig, TrainHistory,
};
use crate::error::{Error, Result};

/// Everything needed to reproduce forecasts from a trained network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub bs_id: String,
    pub feature_set: FeatureSet,
    pub history: usize,
    pub config: TrainConfig,
    pub scaler: Scaler,
    pub model: LstmModel,
}

impl TrainedModel {
    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        let m: Self = serde_json::from_reader(reader)?;
        let expected = LstmModel::zeros(m.model.input_size, m.model.hidden_size).param_count();
        if m.model.params.len() != expected || m.model.input_size != m.feature_set.width() {
            return Err(Error::Shape {
                expected: format!("{expected} parameters for {} inputs", m.feature_set.width()),
                actual: format!(
                    "{} parameters for {} inputs",
                    m.model.params.len(),
                    m.model.input_size
                ),
            });
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForecastRun {
    pub trained: TrainedModel,
    pub history: TrainHistory,
    /// Test-split forecasts in chronological order.
    pub predictions: Vec<Prediction>,
}

/// Builds windows, fits the scaler on the training split, trains from
/// `config.seed` and forecasts the test split.
pub fn fit_and_forecast(
    table: &FeatureTable,
    set: FeatureSet,
    history: usize,
    ranges: &SplitRanges,
    config: &TrainConfig,
) -> Result<ForecastRun> {
    config.validate()?;
    let splits = build_windows(table, set, history, ranges, config.seed)?;
    if splits.test.is_empty() {
        return Err(Error::Validation(format!(
            "{}: test split has no windows",
            table.bs_id
        )));
    }
    let scaler = fit_scaler(set, &splits.train)?;
    let train_w = scaler.apply_all(&splits.train);
    let val_w = scaler.apply_all(&splits.val);
    let test_w = scaler.apply_all(&splits.test);

    let init = LstmModel::init(set.width(), config.hidden_size, config.seed);
    let (model, hist) = train(init, &train_w, &val_w, config)?;
    let predictions = predict(&model, &scaler, &test_w)?;
    Ok(ForecastRun {
        trained: TrainedModel {
            bs_id: table.bs_id.clone(),
            feature_set: set,
            history,
            config: config.clone(),
            scaler,
            model,
        },
        history: hist,
        predictions,
    })
}

/// Writes `slot_index,target,prediction` in original units.
pub fn write_predictions<W: Write>(predictions: &[Prediction], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["slot_index", "target", "prediction"])?;
    for p in predictions {
        w.write_record([
            p.slot_index.to_string(),
            format!("{:?}", p.target),
            format!("{:?}", p.prediction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{split_chronological, SplitRatios};
    use crate::road_data::SLOTS_PER_WEEK;

    fn sine_table(weeks: usize) -> FeatureTable {
        let rows = (0..weeks * SLOTS_PER_WEEK).map(|s| {
            let t = (s % 288) as f64 / 288.0 * std::f64::consts::TAU;
            let flow = 100.0 + 80.0 * t.sin();
            let total = 20.0 + 15.0 * (t + 0.1).sin();
            (s, [flow, 60.0, total * 0.8, total * 0.2, total])
        });
        FeatureTable::from_rows("bs", rows)
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            learning_rate: 5e-3,
            max_epochs: 4,
            patience: 4,
            hidden_size: 4,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn pipeline_forecasts_test_weeks_and_checkpoint_roundtrips() {
        let table = sine_table(4);
        let ranges = split_chronological(4, SplitRatios::new(2, 1, 1)).unwrap();
        let run = fit_and_forecast(&table, FeatureSet::FSC, 5, &ranges, &quick_config()).unwrap();
        assert_eq!(run.predictions.len(), 5 * (288 - 5));
        assert!(run.predictions.windows(2).all(|p| p[0].slot_index < p[1].slot_index));
        assert!(run.predictions[0].slot_index >= 3 * SLOTS_PER_WEEK);

        let mut buf = Vec::new();
        run.trained.save(&mut buf).unwrap();
        let back = TrainedModel::load(buf.as_slice()).unwrap();
        assert_eq!(back, run.trained);

        let mut csv_out = Vec::new();
        write_predictions(&run.predictions[..2], &mut csv_out).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert!(text.starts_with("slot_index,target,prediction\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let table = sine_table(4);
        let ranges = split_chronological(4, SplitRatios::new(2, 1, 1)).unwrap();
        let a = fit_and_forecast(&table, FeatureSet::C, 5, &ranges, &quick_config()).unwrap();
        let b = fit_and_forecast(&table, FeatureSet::C, 5, &ranges, &quick_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_checkpoint_rejected() {
        let table = sine_table(4);
        let ranges = split_chronological(4, SplitRatios::new(2, 1, 1)).unwrap();
        let mut run = fit_and_forecast(&table, FeatureSet::C, 5, &ranges, &quick_config()).unwrap();
        run.trained.model.params.pop();
        let mut buf = Vec::new();
        run.trained.save(&mut buf).unwrap();
        assert!(matches!(TrainedModel::load(buf.as_slice()), Err(Error::Shape { .. })));
    }
}

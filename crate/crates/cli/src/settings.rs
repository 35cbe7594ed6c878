//! Hyperparameters as `key = value` pairs, from a file and from flags.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chardep::parser::{ModelConfig, TrainSchedule};
use chardep::{Mode, RootPolicy};

/// Everything `train` needs besides file paths. Defaults are the published
/// hyperparameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub model: ModelConfig,
    pub schedule: TrainSchedule,
    pub seed: u64,
}

pub const KEYS: &[&str] = &[
    "mode",
    "seed",
    "steps",
    "batch_size",
    "eval_every",
    "patience",
    "learning_rate",
    "decay_rate",
    "decay_steps",
    "momentum",
    "l2",
    "max_grad_norm",
    "unk_replacement",
    "dropout",
    "word_dim",
    "tag_dim",
    "label_dim",
    "char_dim",
    "kernel_widths",
    "channels",
    "char_length",
    "lstm_hidden",
    "token_dim",
    "hidden1",
    "hidden2",
    "root_policy",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("{}: cannot parse {:?}: {}", key, value, e))
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let (m, s) = (&mut self.model, &mut self.schedule);
        match key {
            "mode" => m.repr.mode = value.parse::<Mode>()?,
            "seed" => self.seed = num(key, value)?,
            "steps" => s.max_steps = num(key, value)?,
            "batch_size" => s.batch_size = num(key, value)?,
            "eval_every" => s.eval_every = num(key, value)?,
            "patience" => s.patience = num(key, value)?,
            "learning_rate" => s.optimizer.learning_rate = num(key, value)?,
            "decay_rate" => s.optimizer.decay_rate = num(key, value)?,
            "decay_steps" => s.optimizer.decay_steps = num(key, value)?,
            "momentum" => s.optimizer.momentum = num(key, value)?,
            "l2" => s.optimizer.l2 = num(key, value)?,
            "max_grad_norm" => s.optimizer.max_grad_norm = num(key, value)?,
            "unk_replacement" => s.unk_replacement = num(key, value)?,
            "dropout" => m.dropout = num(key, value)?,
            "word_dim" => m.repr.word_dim = num(key, value)?,
            "tag_dim" => m.repr.tag_dim = num(key, value)?,
            "label_dim" => m.repr.label_dim = num(key, value)?,
            "char_dim" => m.repr.char_dim = num(key, value)?,
            "kernel_widths" => {
                m.repr.kernel_widths = value
                    .split(',')
                    .map(|w| num(key, w.trim()))
                    .collect::<Result<_>>()?
            }
            "channels" => m.repr.channels_per_kernel = num(key, value)?,
            "char_length" => m.repr.char_length = num(key, value)?,
            "lstm_hidden" => m.repr.lstm_hidden = num(key, value)?,
            "token_dim" => m.token_dim = num(key, value)?,
            "hidden1" => m.hidden1 = num(key, value)?,
            "hidden2" => m.hidden2 = num(key, value)?,
            "root_policy" => {
                m.root_policy = match value.to_ascii_lowercase().as_str() {
                    "single" => RootPolicy::Single,
                    "multiple" => RootPolicy::Multiple,
                    _ => bail!("root_policy: expected single or multiple, got {:?}", value),
                }
            }
            _ => bail!("unknown setting {:?}", key),
        }
        Ok(())
    }

    /// Applies a file of `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), i + 1))?;
            self.set(key.trim(), value)
                .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.schedule.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_published_values() {
        let s = Settings::default();
        assert_eq!(s.schedule.max_steps, 100_000);
        assert_eq!(s.schedule.batch_size, 100);
        assert_eq!(s.schedule.optimizer.learning_rate, 0.1);
        assert_eq!(s.schedule.optimizer.decay_rate, 0.95);
        assert_eq!(s.schedule.optimizer.decay_steps, 2000);
        assert_eq!(s.schedule.optimizer.l2, 1e-4);
        assert_eq!(s.schedule.optimizer.momentum, 0.9);
        assert_eq!(s.schedule.optimizer.max_grad_norm, 10.0);
        assert_eq!(s.model.dropout, 0.1);
        let r = &s.model.repr;
        assert_eq!((r.word_dim, r.tag_dim, r.label_dim, r.char_dim), (256, 32, 32, 32));
        assert_eq!((s.model.hidden1, s.model.hidden2), (512, 256));
        assert_eq!(r.kernel_widths, vec![3, 5, 7, 9]);
        assert_eq!((r.channels_per_kernel, r.char_length, r.lstm_hidden), (64, 32, 128));
    }

    #[test]
    fn every_key_is_settable() {
        let values = [
            ("mode", "lstm+word"),
            ("kernel_widths", "2, 4"),
            ("root_policy", "multiple"),
            ("learning_rate", "0.05"),
            ("unk_replacement", "0.25"),
            ("dropout", "0.2"),
            ("decay_rate", "0.9"),
            ("momentum", "0.5"),
            ("l2", "0"),
            ("max_grad_norm", "5"),
        ];
        for key in KEYS {
            let mut s = Settings::default();
            let value = values.iter().find(|(k, _)| k == key).map_or("7", |(_, v)| v);
            s.set(key, value).unwrap();
            assert_ne!(s, Settings::default(), "{}", key);
        }
    }

    #[test]
    fn file_is_applied_line_by_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# scaled run\nmode = CNN\nword_dim=64  # smaller\n\nsteps = 10\n").unwrap();
        let mut s = Settings::default();
        s.apply_file(&path).unwrap();
        assert_eq!(s.model.repr.mode, Mode::Cnn);
        assert_eq!(s.model.repr.word_dim, 64);
        assert_eq!(s.schedule.max_steps, 10);

        std::fs::write(&path, "steps = many\n").unwrap();
        let err = format!("{:#}", s.apply_file(&path).unwrap_err());
        assert!(err.contains("run.cfg:1"), "{}", err);
        std::fs::write(&path, "colour = blue\n").unwrap();
        assert!(s.apply_file(&path).is_err());
    }
}

use serde::{Deserialize, Serialize};

/// Linear attack/decay/sustain/release envelope shared by every sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdsrParams {
    pub attack_s: f64,
    pub decay_s: f64,
    pub sustain: f64,
    pub release_s: f64,
}

impl Default for AdsrParams {
    fn default() -> Self {
        Self { attack_s: 0.005, decay_s: 0.05, sustain: 0.7, release_s: 0.1 }
    }
}

impl AdsrParams {
    pub fn validate(&self) -> Result<(), String> {
        let times = [self.attack_s, self.decay_s, self.release_s];
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(format!("ADSR times must be finite and >= 0: {self:?}"));
        }
        if !(0.0..=1.0).contains(&self.sustain) {
            return Err(format!("sustain {} not in [0, 1]", self.sustain));
        }
        Ok(())
    }
}

fn held_gain(t: f64, p: &AdsrParams) -> f64 {
    if t < p.attack_s {
        t / p.attack_s
    } else if t < p.attack_s + p.decay_s {
        1.0 - (1.0 - p.sustain) * (t - p.attack_s) / p.decay_s
    } else {
        p.sustain
    }
}

/// Envelope gain `t_since_on` seconds after note-on. Once released
/// (`t_since_off` is `Some`), the level reached at the note-off falls
/// linearly to zero over `release_s`.
pub fn adsr_gain(t_since_on: f64, t_since_off: Option<f64>, p: &AdsrParams) -> f64 {
    match t_since_off {
        None => held_gain(t_since_on, p),
        Some(t_off) => {
            if t_off >= p.release_s {
                return 0.0;
            }
            let level = held_gain((t_since_on - t_off).max(0.0), p);
            level * (1.0 - t_off / p.release_s)
        }
    }
}

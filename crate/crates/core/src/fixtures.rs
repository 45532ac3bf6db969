//! The three bundled three-party models. All share the observed
//! distribution uniform on `B = A xor C`.

use crate::model_file::{parse_model, ModelFile};

pub const OTP: &str = include_str!("../examples/otp.model");
pub const JAM: &str = include_str!("../examples/jam.model");
pub const LOOP: &str = include_str!("../examples/loop.model");

/// `(name, text)` for every bundled model.
pub const ALL: [(&str, &str); 3] = [("otp", OTP), ("jam", JAM), ("loop", LOOP)];

fn load(text: &str) -> ModelFile {
    parse_model(text).expect("bundled model parses")
}

/// `A`, `C` uniform, `B = A xor C`.
pub fn otp() -> ModelFile {
    load(OTP)
}

/// Latent `Lambda` copied to `A`, `B` uniform, `C = B xor Lambda`.
pub fn jam() -> ModelFile {
    load(JAM)
}

/// `A = Lambda`, `B = A xor C`, `C = B xor Lambda`, a cycle through `B`
/// and `C`.
pub fn looped() -> ModelFile {
    load(LOOP)
}

use crate::measures::LossValue;
use crate::protocol::{drive, Adversary, Dataset, Mechanism, ProtocolError, Truncation, ViewTranscript};

/// The view cut before the first answer after which the reported loss is
/// not below `budget`.
pub fn truncate_view(
    adversary: &dyn Adversary,
    odometer: &dyn Mechanism,
    dataset: &Dataset,
    seed: u64,
    budget: &LossValue,
) -> Result<ViewTranscript, ProtocolError> {
    drive(
        adversary,
        odometer,
        dataset,
        seed,
        odometer.comm_bound(),
        Some(Truncation { budget }),
    )
}

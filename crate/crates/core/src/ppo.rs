pub struct PolicyParams;
pub struct TrainConfig;

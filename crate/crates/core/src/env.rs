pub struct EnvConfig;
pub struct FeedforwardConfig;

pub struct RobotModel;
pub struct SimState;
pub struct TerrainParams;

pub struct Placeholder2;

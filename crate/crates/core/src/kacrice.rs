pub struct Placeholder0;

# tiltbench - exponential tilt estimation for outcomes missing not at random

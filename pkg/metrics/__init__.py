"""Image-quality losses, PSNR and rank correlation."""

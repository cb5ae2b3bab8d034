from torscope.cli import main
import sys
sys.exit(main())

from watermark_detection.app.main import main

raise SystemExit(main())
